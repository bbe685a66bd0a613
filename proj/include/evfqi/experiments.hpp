#pragma once

#include "evfqi/costs.hpp"
#include "evfqi/environment.hpp"
#include "evfqi/evaluation.hpp"
#include "evfqi/qlearn.hpp"
#include "evfqi/sessions.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evfqi {

/// Everything one experiment run depends on.
struct ExperimentConfig {
    SlotConfig slots;
    GeneratorParams generator;
    int n_episodes = 300;
    double charger_kw = 11.0;
    FqiConfig fqi;
    std::vector<int> windows_E{1, 5, 10};
    int block = 30;          // increasing-window step and test size
    int max_train = 270;
    int rolling_train = 90;
    int rolling_test = 30;
    int rolling_stride = 30;
    int max_splits = 0;      // 0 = every split
    std::uint64_t seed = 0;
    int jobs = 0;            // 0 = hardware threads

    static ExperimentConfig desk_default();
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One trained configuration: which experience set it learns from.
struct PolicySpec {
    std::string label;
    StateRepr repr = StateRepr::vector;
    Scaling scaling = Scaling::local;
    CostKind cost = CostKind::quadratic;
    int window = 1;
};

/// RL_ml, RL_vl, RL_mg, RL_vg (quadratic cost).
std::vector<PolicySpec> observability_policies();
/// RL_q plus RL_a and RL_m for every E.
std::vector<PolicySpec> credit_policies(const std::vector<int>& windows_E);

struct PolicyRun {
    PolicySpec spec;
    int input_width = 0;
    std::size_t tuples = 0;
    /// normalized[k][i]: test episode i under the iterate of iteration k+1.
    std::vector<std::vector<double>> normalized;
    std::vector<double> iteration_seconds;
    double total_seconds = 0.0;

    const std::vector<double>& final_loads() const { return normalized.back(); }
    std::vector<double> mean_curve() const;
};

/// Oracle results for an episode ordering, indexed by position.
struct OracleTable {
    std::vector<ScheduleResult> results;
    ProfileHistory history() const;
};

OracleTable solve_all(const std::vector<Episode>& ordering, int jobs);

/// Trains `spec` on ordering[split.train_*] and evaluates every iterate on
/// ordering[split.test_*].
PolicyRun train_and_evaluate(const std::vector<Episode>& ordering, const OracleTable& oracle,
                             const ValidationSplit& split, const PolicySpec& spec,
                             const FqiConfig& fqi, std::uint64_t seed);

struct PairwiseP {
    std::string a;
    std::string b;
    int n = 0;
    double p_value = 0.0;  // NaN when too few non-zero differences
};

struct SplitReport {
    ValidationSplit split;
    std::vector<int> test_episode_ids;
    std::vector<double> bau;
    std::vector<double> heuristic;
    std::vector<PolicyRun> runs;
    std::vector<PairwiseP> pvalues;
};

struct ExperimentReport {
    std::string name;  // "obs" or "credit"
    std::vector<SplitReport> splits;
};

/// Increasing windows over `episodes`, policies RL_ml/vl/mg/vg.
ExperimentReport run_experiment_observability(const std::vector<Episode>& episodes,
                                              const ExperimentConfig& config);

/// Rolling windows over the weekday episodes, policies RL_q/a/m.
ExperimentReport run_experiment_credit(const std::vector<Episode>& episodes,
                                       const ExperimentConfig& config);

/// Writes <out>/<name>/<split>/<policy>.csv, <split>/timing.csv, summary.csv,
/// pvalues.csv and manifest.json. Everything except timing.csv is a pure
/// function of the configuration and the input data.
void write_report(const std::filesystem::path& out, const ExperimentReport& report,
                  const ExperimentConfig& config, const std::vector<Episode>& episodes);

/// Git blob hash (SHA-1 of "blob <size>\0" + content), hex encoded.
std::string git_blob_hash(const std::string& content);

/// Episodes as JSON lines, the canonical input for hashing.
std::string episodes_jsonl(const std::vector<Episode>& episodes);

}  // namespace evfqi
