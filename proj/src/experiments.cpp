#include "evfqi/experiments.hpp"

#include "evfqi/baselines.hpp"
#include "evfqi/log.hpp"
#include "evfqi/oracle.hpp"
#include "evfqi/parallel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace evfqi {

using nlohmann::json;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void require_known_keys(const json& j, const std::set<std::string>& known, const char* where) {
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw std::invalid_argument(std::string("unknown key '") + key + "' in " + where);
}

}  // namespace

ExperimentConfig ExperimentConfig::desk_default() {
    ExperimentConfig c;
    c.generator = GeneratorParams::desk_default(c.slots);
    return c;
}

json to_json(const ExperimentConfig& c) {
    return {
        {"slots",
         {{"slot_hours", c.slots.slot_hours},
          {"slots_per_episode", c.slots.slots_per_episode},
          {"episode_start_hour", c.slots.episode_start_hour},
          {"max_stations", c.slots.max_stations}}},
        {"generator",
         {{"arrival_rate", c.generator.arrival_rate},
          {"duration_weights", c.generator.duration_weights},
          {"demand_weights", c.generator.demand_weights},
          {"weekend_rate_scale", c.generator.weekend_rate_scale},
          {"first_weekday", c.generator.first_weekday}}},
        {"fqi",
         {{"iterations", c.fqi.iterations},
          {"trajectories_per_episode", c.fqi.trajectories_per_episode},
          {"epochs", c.fqi.epochs},
          {"batch_size", c.fqi.batch_size},
          {"learning_rate", c.fqi.learning_rate},
          {"huber_delta", c.fqi.huber_delta},
          {"hidden", c.fqi.hidden},
          {"target_scale", c.fqi.target_scale},
          {"action_cap", c.fqi.action_cap}}},
        {"n_episodes", c.n_episodes},
        {"charger_kw", c.charger_kw},
        {"windows_E", c.windows_E},
        {"block", c.block},
        {"max_train", c.max_train},
        {"rolling_train", c.rolling_train},
        {"rolling_test", c.rolling_test},
        {"rolling_stride", c.rolling_stride},
        {"max_splits", c.max_splits},
        {"seed", c.seed},
        {"jobs", c.jobs},
    };
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig c = ExperimentConfig::desk_default();
    require_known_keys(j,
                       {"slots", "generator", "fqi", "n_episodes", "charger_kw", "windows_E",
                        "block", "max_train", "rolling_train", "rolling_test", "rolling_stride",
                        "max_splits", "seed", "jobs"},
                       "config");
    auto get = [](const json& obj, const char* key, auto& field) {
        if (obj.contains(key)) obj.at(key).get_to(field);
    };
    if (j.contains("slots")) {
        const auto& s = j.at("slots");
        require_known_keys(s, {"slot_hours", "slots_per_episode", "episode_start_hour",
                               "max_stations"},
                           "slots");
        get(s, "slot_hours", c.slots.slot_hours);
        get(s, "slots_per_episode", c.slots.slots_per_episode);
        get(s, "episode_start_hour", c.slots.episode_start_hour);
        get(s, "max_stations", c.slots.max_stations);
        c.slots.validate();
        if (!j.contains("generator")) c.generator = GeneratorParams::desk_default(c.slots);
    }
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        require_known_keys(g, {"arrival_rate", "duration_weights", "demand_weights",
                               "weekend_rate_scale", "first_weekday"},
                           "generator");
        get(g, "arrival_rate", c.generator.arrival_rate);
        get(g, "duration_weights", c.generator.duration_weights);
        get(g, "demand_weights", c.generator.demand_weights);
        get(g, "weekend_rate_scale", c.generator.weekend_rate_scale);
        get(g, "first_weekday", c.generator.first_weekday);
    }
    if (j.contains("fqi")) {
        const auto& f = j.at("fqi");
        require_known_keys(f, {"iterations", "trajectories_per_episode", "epochs", "batch_size",
                               "learning_rate", "huber_delta", "hidden", "target_scale",
                               "action_cap"},
                           "fqi");
        get(f, "iterations", c.fqi.iterations);
        get(f, "trajectories_per_episode", c.fqi.trajectories_per_episode);
        get(f, "epochs", c.fqi.epochs);
        get(f, "batch_size", c.fqi.batch_size);
        get(f, "learning_rate", c.fqi.learning_rate);
        get(f, "huber_delta", c.fqi.huber_delta);
        get(f, "hidden", c.fqi.hidden);
        get(f, "target_scale", c.fqi.target_scale);
        get(f, "action_cap", c.fqi.action_cap);
    }
    get(j, "n_episodes", c.n_episodes);
    get(j, "charger_kw", c.charger_kw);
    get(j, "windows_E", c.windows_E);
    get(j, "block", c.block);
    get(j, "max_train", c.max_train);
    get(j, "rolling_train", c.rolling_train);
    get(j, "rolling_test", c.rolling_test);
    get(j, "rolling_stride", c.rolling_stride);
    get(j, "max_splits", c.max_splits);
    get(j, "seed", c.seed);
    get(j, "jobs", c.jobs);
    c.generator.validate(c.slots);
    c.fqi.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    return experiment_config_from_json(json::parse(in));
}

std::vector<PolicySpec> observability_policies() {
    return {{"RL_ml", StateRepr::matrix, Scaling::local, CostKind::quadratic, 1},
            {"RL_vl", StateRepr::vector, Scaling::local, CostKind::quadratic, 1},
            {"RL_mg", StateRepr::matrix, Scaling::global, CostKind::quadratic, 1},
            {"RL_vg", StateRepr::vector, Scaling::global, CostKind::quadratic, 1}};
}

std::vector<PolicySpec> credit_policies(const std::vector<int>& windows_E) {
    std::vector<PolicySpec> out{
        {"RL_q", StateRepr::vector, Scaling::global, CostKind::quadratic, 1}};
    for (int e : windows_E)
        out.push_back({"RL_a_E" + std::to_string(e), StateRepr::vector, Scaling::global,
                       CostKind::linear_avg, e});
    for (int e : windows_E)
        out.push_back({"RL_m_E" + std::to_string(e), StateRepr::vector, Scaling::global,
                       CostKind::linear_median, e});
    return out;
}

std::vector<double> PolicyRun::mean_curve() const {
    std::vector<double> curve;
    for (const auto& loads : normalized) curve.push_back(mean_of(loads));
    return curve;
}

ProfileHistory OracleTable::history() const {
    ProfileHistory h;
    for (std::size_t i = 0; i < results.size(); ++i)
        h.emplace(static_cast<int>(i), results[i].profile);
    return h;
}

OracleTable solve_all(const std::vector<Episode>& ordering, int jobs) {
    OracleTable table;
    table.results.resize(ordering.size());
    parallel_for(ordering.size(), jobs,
                 [&](std::size_t i) { table.results[i] = solve_optimal(ordering[i]); });
    return table;
}

PolicyRun train_and_evaluate(const std::vector<Episode>& ordering, const OracleTable& oracle,
                             const ValidationSplit& split, const PolicySpec& spec,
                             const FqiConfig& fqi_config, std::uint64_t seed) {
    if (split.train_end > static_cast<int>(ordering.size()) ||
        split.test_end > static_cast<int>(ordering.size()))
        throw std::invalid_argument("split " + split.label + " exceeds the episode ordering");
    std::vector<Episode> train(ordering.begin() + split.train_begin,
                               ordering.begin() + split.train_end);
    std::vector<int> positions(train.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        positions[i] = split.train_begin + static_cast<int>(i);

    ExperienceConfig ec;
    ec.repr = spec.repr;
    ec.scaling = spec.scaling;
    ec.cost = spec.cost;
    ec.window = spec.window;
    ec.trajectories_per_episode = fqi_config.trajectories_per_episode;
    ec.seed = seed;
    ec.jobs = fqi_config.jobs;
    const ExperienceSet set = generate_experience(train, positions, oracle.history(), ec);

    PolicyRun run;
    run.spec = spec;
    run.input_width = input_width(spec.repr, set.horizon);
    run.tuples = set.tuples.size();

    FqiConfig fc = fqi_config;
    fc.seed = seed;
    auto evaluate = [&](int, const QNetwork& net) {
        const Policy policy = greedy_net_policy(net, spec.repr, spec.scaling);
        std::vector<double> loads;
        for (int e = split.test_begin; e < split.test_end; ++e) {
            const auto r = rollout(policy, ordering[static_cast<std::size_t>(e)]);
            loads.push_back(normalized_load(episode_load(r.profile),
                                            oracle.results[static_cast<std::size_t>(e)].load));
        }
        run.normalized.push_back(std::move(loads));
    };
    const auto iterations = fqi(set, fc, evaluate);
    for (const auto& it : iterations) {
        run.iteration_seconds.push_back(it.seconds);
        run.total_seconds += it.seconds;
    }
    return run;
}

namespace {

std::vector<PairwiseP> pairwise_pvalues(const SplitReport& split) {
    std::vector<std::pair<std::string, const std::vector<double>*>> columns{
        {"BAU", &split.bau}, {"Heur", &split.heuristic}};
    for (const auto& run : split.runs) columns.emplace_back(run.spec.label, &run.final_loads());
    std::vector<PairwiseP> out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t j = i + 1; j < columns.size(); ++j) {
            std::vector<std::pair<double, double>> pairs;
            for (std::size_t k = 0; k < columns[i].second->size(); ++k)
                pairs.emplace_back((*columns[i].second)[k], (*columns[j].second)[k]);
            PairwiseP p{columns[i].first, columns[j].first, 0,
                        std::numeric_limits<double>::quiet_NaN()};
            try {
                const auto w = wilcoxon_signed_rank(pairs);
                p.n = w.n;
                p.p_value = w.p_value;
            } catch (const std::invalid_argument&) {
                // fewer than 5 non-zero differences: left as NaN
            }
            out.push_back(std::move(p));
        }
    return out;
}

ExperimentReport run_splits(const std::string& name, const std::vector<Episode>& ordering,
                            std::vector<ValidationSplit> splits,
                            const std::vector<PolicySpec>& policies,
                            const ExperimentConfig& config) {
    if (config.max_splits > 0 && static_cast<int>(splits.size()) > config.max_splits)
        splits.resize(static_cast<std::size_t>(config.max_splits));
    const int jobs = config.jobs > 0 ? config.jobs : default_jobs();
    const OracleTable oracle = solve_all(ordering, jobs);

    ExperimentReport report;
    report.name = name;
    report.splits.resize(splits.size());
    for (std::size_t s = 0; s < splits.size(); ++s) {
        auto& sr = report.splits[s];
        sr.split = splits[s];
        for (int e = splits[s].test_begin; e < splits[s].test_end; ++e) {
            const auto& ep = ordering[static_cast<std::size_t>(e)];
            const double opt = oracle.results[static_cast<std::size_t>(e)].load;
            sr.test_episode_ids.push_back(ep.episode_id);
            sr.bau.push_back(normalized_load(bau_schedule(ep).load, opt));
            sr.heuristic.push_back(normalized_load(heuristic_schedule(ep).load, opt));
        }
        sr.runs.resize(policies.size());
    }

    FqiConfig fc = config.fqi;
    fc.jobs = 1;  // parallelism lives at the run level
    const std::size_t n_runs = splits.size() * policies.size();
    parallel_for(n_runs, jobs, [&](std::size_t r) {
        const std::size_t s = r / policies.size();
        const std::size_t p = r % policies.size();
        report.splits[s].runs[p] =
            train_and_evaluate(ordering, oracle, splits[s], policies[p], fc,
                               derive_seed(config.seed, s));
    });
    for (auto& sr : report.splits) sr.pvalues = pairwise_pvalues(sr);
    return report;
}

}  // namespace

ExperimentReport run_experiment_observability(const std::vector<Episode>& episodes,
                                              const ExperimentConfig& config) {
    auto splits = increasing_windows(static_cast<int>(episodes.size()), config.block,
                                     config.max_train);
    return run_splits("obs", episodes, std::move(splits), observability_policies(), config);
}

ExperimentReport run_experiment_credit(const std::vector<Episode>& episodes,
                                       const ExperimentConfig& config) {
    const auto weekdays = weekday_filter(episodes);
    auto splits = rolling_windows(static_cast<int>(weekdays.size()), config.rolling_train,
                                  config.rolling_test, config.rolling_stride);
    return run_splits("credit", weekdays, std::move(splits), credit_policies(config.windows_E),
                      config);
}

std::string episodes_jsonl(const std::vector<Episode>& episodes) {
    std::ostringstream out;
    write_episodes_jsonl(out, episodes);
    return out.str();
}

std::string git_blob_hash(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw std::runtime_error("cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("SHA-1 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

void write_report(const std::filesystem::path& out, const ExperimentReport& report,
                  const ExperimentConfig& config, const std::vector<Episode>& episodes) {
    namespace fs = std::filesystem;
    const fs::path root = out / report.name;
    fs::create_directories(root);
    auto open = [](const fs::path& p) {
        std::ofstream f(p);
        if (!f) throw std::runtime_error("cannot write " + p.string());
        return f;
    };

    auto summary = open(root / "summary.csv");
    summary << "split,policy,iteration,mean_normalized_load,median_normalized_load\n";
    auto pvalues = open(root / "pvalues.csv");
    pvalues << "split,policy_a,policy_b,n,p_value\n";

    for (const auto& sr : report.splits) {
        const fs::path dir = root / sr.split.label;
        fs::create_directories(dir);
        auto write_baseline = [&](const std::string& label, const std::vector<double>& loads) {
            auto f = open(dir / (label + ".csv"));
            f << "episode_id,normalized_load,iteration\n";
            for (std::size_t i = 0; i < loads.size(); ++i)
                f << sr.test_episode_ids[i] << ',' << num(loads[i]) << ",0\n";
            summary << sr.split.label << ',' << label << ",0," << num(mean_of(loads)) << ','
                    << num(median_of(loads)) << '\n';
        };
        write_baseline("BAU", sr.bau);
        write_baseline("Heur", sr.heuristic);

        auto timing = open(dir / "timing.csv");
        timing << "policy,iteration,train_seconds\n";
        for (const auto& run : sr.runs) {
            auto f = open(dir / (run.spec.label + ".csv"));
            f << "episode_id,normalized_load,iteration\n";
            for (std::size_t k = 0; k < run.normalized.size(); ++k) {
                const auto& loads = run.normalized[k];
                for (std::size_t i = 0; i < loads.size(); ++i)
                    f << sr.test_episode_ids[i] << ',' << num(loads[i]) << ',' << k + 1 << '\n';
                summary << sr.split.label << ',' << run.spec.label << ',' << k + 1 << ','
                        << num(mean_of(loads)) << ',' << num(median_of(loads)) << '\n';
            }
            for (std::size_t k = 0; k < run.iteration_seconds.size(); ++k)
                timing << run.spec.label << ',' << k + 1 << ',' << num(run.iteration_seconds[k])
                       << '\n';
            timing << run.spec.label << ",total," << num(run.total_seconds) << '\n';
        }
        for (const auto& p : sr.pvalues)
            pvalues << sr.split.label << ',' << p.a << ',' << p.b << ',' << p.n << ','
                    << num(p.p_value) << '\n';
    }

    json policies = json::array();
    if (!report.splits.empty())
        for (const auto& run : report.splits.front().runs)
            policies.push_back({{"label", run.spec.label},
                                {"repr", to_string(run.spec.repr)},
                                {"scaling", to_string(run.spec.scaling)},
                                {"cost", to_string(run.spec.cost)},
                                {"E", run.spec.window},
                                {"input_width", run.input_width}});
    json splits = json::array();
    for (const auto& sr : report.splits)
        splits.push_back({{"label", sr.split.label},
                          {"train", {sr.split.train_begin, sr.split.train_end}},
                          {"test", {sr.split.test_begin, sr.split.test_end}},
                          {"seed", derive_seed(config.seed, static_cast<std::uint64_t>(
                                                                &sr - report.splits.data()))}});
    const json manifest = {{"experiment", report.name},
                           {"version", "0.1.0"},
                           {"config", to_json(config)},
                           {"seed", config.seed},
                           {"data_hash", git_blob_hash(episodes_jsonl(episodes))},
                           {"episodes", episodes.size()},
                           {"policies", policies},
                           {"splits", splits}};
    auto m = open(root / "manifest.json");
    m << manifest.dump(2) << '\n';
}

}  // namespace evfqi
