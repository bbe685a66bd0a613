// Command-line entry point: data generation and ingestion, oracle and
// baseline evaluation, single-configuration training and the experiment
// harness.

#include "evfqi/baselines.hpp"
#include "evfqi/evaluation.hpp"
#include "evfqi/experiments.hpp"
#include "evfqi/oracle.hpp"
#include "evfqi/parallel.hpp"
#include "evfqi/qlearn.hpp"
#include "evfqi/sessions.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

namespace fs = std::filesystem;
using namespace evfqi;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> jobs;
    std::string episodes;
    std::string repr = "vector";
    std::string scaling = "local";
    std::string cost = "quadratic";
    int E = 1;
    std::optional<int> iterations;
    std::optional<int> trajectories;
    std::optional<int> count;
    std::string csv;
    double charger_kw = 0.0;
    int stations = 0;
    int train_episodes = 90;
    int test_episodes = 30;
    int train_offset = 0;
};

// Thrown for problems with the command line itself; reported with usage text.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ExperimentConfig resolve_config(const Flags& f) {
    ExperimentConfig c = ExperimentConfig::desk_default();
    if (!f.config.empty()) {
        try {
            c = load_experiment_config(f.config);
        } catch (const std::exception& e) {
            throw UsageError(std::string("invalid config ") + f.config + ": " + e.what());
        }
    }
    if (f.seed) c.seed = *f.seed;
    if (f.jobs) c.jobs = *f.jobs;
    if (f.iterations) c.fqi.iterations = *f.iterations;
    if (f.trajectories) c.fqi.trajectories_per_episode = *f.trajectories;
    if (f.count) c.n_episodes = *f.count;
    if (f.charger_kw > 0.0) c.charger_kw = f.charger_kw;
    c.fqi.validate();
    return c;
}

std::vector<Episode> load_or_generate(const Flags& f, const ExperimentConfig& c) {
    if (f.episodes.empty()) return generate_synthetic(c.slots, c.n_episodes, c.generator, c.seed);
    std::ifstream in(f.episodes);
    if (!in) throw std::invalid_argument("cannot open episodes file " + f.episodes);
    return read_episodes_jsonl(in, c.slots);
}

std::vector<Episode> load_required(const Flags& f, const ExperimentConfig& c) {
    if (f.episodes.empty()) throw UsageError("--episodes is required");
    return load_or_generate(f, c);
}

// Writes to --out when given, otherwise to stdout.
template <typename Fn>
void emit(const std::string& out, Fn&& write) {
    if (out.empty()) {
        write(std::cout);
        return;
    }
    if (const auto parent = fs::path(out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    write(f);
}

int cmd_generate(const Flags& f) {
    const auto c = resolve_config(f);
    const auto episodes = generate_synthetic(c.slots, c.n_episodes, c.generator, c.seed);
    emit(f.out, [&](std::ostream& os) { write_episodes_jsonl(os, episodes); });
    return 0;
}

int cmd_ingest(const Flags& f) {
    const auto c = resolve_config(f);
    std::ifstream in(f.csv);
    if (!in) throw std::invalid_argument("cannot open csv " + f.csv);
    auto parsed = parse_transactions_csv(in);
    auto rows = std::move(parsed.rows);
    if (f.stations > 0) rows = filter_stations(rows, select_busiest_stations(rows, f.stations));
    const auto result = discretize(rows, c.slots, c.charger_kw);
    emit(f.out, [&](std::ostream& os) { write_episodes_jsonl(os, result.episodes); });
    std::cerr << "ingested episodes=" << result.episodes.size()
              << " malformed=" << parsed.rejected << " rejected=" << result.rejected
              << " dropped=" << result.dropped << " over_capacity=" << result.capacity_rejected
              << '\n';
    return 0;
}

int cmd_oracle(const Flags& f) {
    const auto c = resolve_config(f);
    const auto episodes = load_required(f, c);
    const auto table = solve_all(episodes, c.jobs > 0 ? c.jobs : default_jobs());
    for (std::size_t i = 0; i < episodes.size(); ++i)
        std::cout << "episode " << episodes[i].episode_id << ": L_opt = " << table.results[i].load
                  << '\n';
    if (!f.out.empty())
        emit(f.out, [&](std::ostream& os) {
            for (const auto& r : table.results) os << profile_to_json(r.profile) << '\n';
        });
    return 0;
}

int cmd_baseline(const Flags& f) {
    const auto c = resolve_config(f);
    const auto episodes = load_required(f, c);
    const auto table = solve_all(episodes, c.jobs > 0 ? c.jobs : default_jobs());
    emit(f.out, [&](std::ostream& os) {
        os << "episode_id,L_opt,L_bau,L_heur,bau_normalized,heur_normalized\n";
        for (std::size_t i = 0; i < episodes.size(); ++i) {
            const double opt = table.results[i].load;
            const double bau = bau_schedule(episodes[i]).load;
            const double heur = heuristic_schedule(episodes[i]).load;
            os << episodes[i].episode_id << ',' << opt << ',' << bau << ',' << heur << ','
               << normalized_load(bau, opt) << ',' << normalized_load(heur, opt) << '\n';
        }
    });
    return 0;
}

int cmd_train(const Flags& f) {
    auto c = resolve_config(f);
    const auto episodes = load_or_generate(f, c);
    const int n = static_cast<int>(episodes.size());
    const int a = f.train_offset, b = a + f.train_episodes, d = b + f.test_episodes;
    if (a < 0 || f.train_episodes < 1 || f.test_episodes < 1 || d > n)
        throw std::invalid_argument("split needs " + std::to_string(d) + " episodes, have " +
                                    std::to_string(n));
    char label[64];
    std::snprintf(label, sizeof label, "train%03d-%03d_test%03d-%03d", a + 1, b, b + 1, d);
    const ValidationSplit split{a, b, b, d, label};
    const PolicySpec spec{"RL", parse_state_repr(f.repr), parse_scaling(f.scaling),
                          parse_cost_kind(f.cost), f.E};
    c.fqi.jobs = c.jobs > 0 ? c.jobs : default_jobs();
    const auto oracle = solve_all(episodes, c.fqi.jobs);
    const auto run = train_and_evaluate(episodes, oracle, split, spec, c.fqi, c.seed);
    emit(f.out, [&](std::ostream& os) {
        os << "iteration,mean_normalized_load,median_normalized_load,train_seconds\n";
        for (std::size_t k = 0; k < run.normalized.size(); ++k)
            os << k + 1 << ',' << mean_of(run.normalized[k]) << ','
               << median_of(run.normalized[k]) << ',' << run.iteration_seconds[k] << '\n';
    });
    return 0;
}

int cmd_experiment(const Flags& f, const std::string& which) {
    const auto c = resolve_config(f);
    if (f.out.empty()) throw UsageError("--out is required");
    const auto episodes = load_or_generate(f, c);
    ExperimentReport report;
    if (which == "obs")
        report = run_experiment_observability(episodes, c);
    else if (which == "credit")
        report = run_experiment_credit(episodes, c);
    else
        throw UsageError("experiment must be 'obs' or 'credit', got '" + which + "'");
    write_report(f.out, report, c, episodes);
    std::cout << "wrote " << (fs::path(f.out) / report.name).string() << " splits="
              << report.splits.size() << '\n';
    return 0;
}

int cmd_validate(const Flags& f) {
    const auto c = resolve_config(f);
    const auto episodes = load_or_generate(f, c);
    const auto table = solve_all(episodes, c.jobs > 0 ? c.jobs : default_jobs());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& ep = episodes[i];
        const std::string where = "episode " + std::to_string(ep.episode_id);
        validate_episode(ep);
        const auto& opt = table.results[i];
        if (static_cast<int>(opt.profile.total()) != ep.total_demand())
            throw std::logic_error(where + ": oracle profile does not conserve demand");
        if (!is_exchange_optimal(ep, opt.schedule))
            throw std::logic_error(where + ": oracle schedule admits an improving move");
        const auto bau = bau_schedule(ep);
        const auto heur = heuristic_schedule(ep);
        if (bau.load < opt.load || heur.load < opt.load)
            throw std::logic_error(where + ": a baseline beats the oracle");
        const auto bau_run = rollout(bau_policy(), ep);
        if (bau_run.profile.power != bau.profile.power)
            throw std::logic_error(where + ": BAU rollout differs from the BAU schedule");
        rollout(random_policy(derive_seed(c.seed, static_cast<std::uint64_t>(i))), ep);
    }
    std::cout << "ok episodes=" << episodes.size() << '\n';
    return 0;
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--jobs", f.jobs, "worker threads (default: hardware threads)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", f.out, "output path");
}

void add_training(CLI::App* sub, Flags& f) {
    sub->add_option("--iterations", f.iterations, "FQI iterations")->check(CLI::PositiveNumber);
    sub->add_option("--trajectories", f.trajectories, "random trajectories per episode")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fitted Q-iteration for EV fleet charging"};
    app.require_subcommand(1);
    Flags f;

    auto* generate = app.add_subcommand("generate", "synthetic episodes as JSON lines");
    add_common(generate, f);
    generate->add_option("--count", f.count, "number of episodes")->check(CLI::PositiveNumber);

    auto* ingest = app.add_subcommand("ingest", "CSV transactions to episodes");
    add_common(ingest, f);
    ingest->add_option("--csv", f.csv, "transactions CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--charger-kw", f.charger_kw, "charger power in kW")
        ->check(CLI::PositiveNumber);
    ingest->add_option("--stations", f.stations, "keep only the k busiest stations")
        ->check(CLI::PositiveNumber);

    auto* oracle = app.add_subcommand("oracle", "optimal load per episode");
    add_common(oracle, f);
    oracle->add_option("--episodes", f.episodes, "episodes JSON lines")->check(CLI::ExistingFile);

    auto* baseline = app.add_subcommand("baseline", "BAU and heuristic loads per episode");
    add_common(baseline, f);
    baseline->add_option("--episodes", f.episodes, "episodes JSON lines")
        ->check(CLI::ExistingFile);

    auto* train = app.add_subcommand("train", "train and evaluate one configuration on one split");
    add_common(train, f);
    add_training(train, f);
    train->add_option("--episodes", f.episodes, "episodes JSON lines (default: generate)")
        ->check(CLI::ExistingFile);
    train->add_option("--repr", f.repr, "state representation")
        ->check(CLI::IsMember({"matrix", "vector"}));
    train->add_option("--scaling", f.scaling, "action scaling")
        ->check(CLI::IsMember({"local", "global"}));
    train->add_option("--cost", f.cost, "cost function")
        ->check(CLI::IsMember({"quadratic", "linear-avg", "linear-med"}));
    train->add_option("--E", f.E, "preceding days in the optimal-profile set")
        ->check(CLI::PositiveNumber);
    train->add_option("--train-offset", f.train_offset, "first training episode (0-based)");
    train->add_option("--train-episodes", f.train_episodes, "training episodes");
    train->add_option("--test-episodes", f.test_episodes, "test episodes");

    auto* experiment = app.add_subcommand("experiment", "run the obs or credit experiment");
    std::string which;
    experiment->add_option("name", which, "obs | credit")
        ->required()
        ->check(CLI::IsMember({"obs", "credit"}));
    add_common(experiment, f);
    add_training(experiment, f);
    experiment->add_option("--episodes", f.episodes, "episodes JSON lines (default: generate)")
        ->check(CLI::ExistingFile);

    auto* validate = app.add_subcommand("validate", "check dataset invariants");
    add_common(validate, f);
    validate->add_option("--episodes", f.episodes, "episodes JSON lines (default: generate)")
        ->check(CLI::ExistingFile);

    if (argc <= 1) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(f);
        if (ingest->parsed()) return cmd_ingest(f);
        if (oracle->parsed()) return cmd_oracle(f);
        if (baseline->parsed()) return cmd_baseline(f);
        if (train->parsed()) return cmd_train(f);
        if (experiment->parsed()) return cmd_experiment(f, which);
        if (validate->parsed()) return cmd_validate(f);
    } catch (const UsageError& e) {
        std::cerr << app.help() << "error: usage: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid-input: " << e.what() << '\n';
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "error: invariant: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
