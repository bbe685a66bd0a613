#include "evfqi/qlearn.hpp"

#include "evfqi/log.hpp"
#include "evfqi/parallel.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace evfqi {

int input_width(StateRepr repr, int horizon) {
    return repr == StateRepr::matrix ? horizon * horizon + horizon + 1 : 2 * horizon + 1;
}

namespace {

std::vector<float> encode(int t, int horizon, const std::vector<double>& obs,
                          const ScaledAction* action) {
    std::vector<float> x;
    x.reserve(1 + obs.size() + (action ? action->values.size() : 0));
    x.push_back(static_cast<float>(t) / static_cast<float>(horizon));
    for (double v : obs) x.push_back(static_cast<float>(v));
    if (action)
        for (double v : action->values) x.push_back(static_cast<float>(v));
    return x;
}

std::vector<int> observation_counts(const ParkState& park, StateRepr repr) {
    const auto h = static_cast<std::size_t>(park.horizon);
    if (repr == StateRepr::matrix) {
        std::vector<int> grid(h * h, 0);
        for (const auto& ev : park.connected)
            ++grid[static_cast<std::size_t>(ev.depart_remaining - 1) * h +
                   static_cast<std::size_t>(ev.charge_remaining - 1)];
        return grid;
    }
    return flex_counts(park).counts;
}

std::string state_key(int t, const std::vector<int>& counts) {
    std::string key(sizeof(int) * (counts.size() + 1), '\0');
    std::memcpy(key.data(), &t, sizeof(int));
    std::memcpy(key.data() + sizeof(int), counts.data(), sizeof(int) * counts.size());
    return key;
}

struct RawStep {
    ExperienceState state;
    ExperienceState next;
    ActionCounts action;
    double cost = 0.0;
};

// Suffix matrix (S x A) of scaled actions for every feasible action at `flex`.
Eigen::MatrixXf scaled_action_matrix(const std::vector<ActionCounts>& actions,
                                     const FlexCounts& flex, Scaling scaling, int capacity) {
    const auto s = static_cast<Eigen::Index>(flex.counts.size());
    Eigen::MatrixXf m(s, static_cast<Eigen::Index>(actions.size()));
    for (std::size_t a = 0; a < actions.size(); ++a) {
        const auto scaled = scale(actions[a], flex, scaling, capacity);
        for (Eigen::Index d = 0; d < s; ++d)
            m(d, static_cast<Eigen::Index>(a)) =
                static_cast<float>(scaled.values[static_cast<std::size_t>(d)]);
    }
    return m;
}

}  // namespace

std::vector<float> encode_input(int t, const MatrixObservation& obs, const ScaledAction& a) {
    if (a.values.size() != static_cast<std::size_t>(obs.size) ||
        obs.grid.size() != static_cast<std::size_t>(obs.size * obs.size))
        throw std::invalid_argument("observation and action dimensions disagree");
    return encode(t, obs.size, obs.grid, &a);
}

std::vector<float> encode_input(int t, const VectorObservation& obs, const ScaledAction& a) {
    if (a.values.size() != obs.bins.size())
        throw std::invalid_argument("observation and action dimensions disagree");
    return encode(t, static_cast<int>(obs.bins.size()), obs.bins, &a);
}

std::vector<float> encode_state(const ParkState& park, StateRepr repr) {
    if (repr == StateRepr::matrix) return encode(park.t, park.horizon, observe_matrix(park).grid, nullptr);
    return encode(park.t, park.horizon, observe_vector(park).bins, nullptr);
}

std::vector<float> ExperienceSet::state_features(int index) const {
    const auto& s = states.at(static_cast<std::size_t>(index));
    std::vector<float> x;
    x.reserve(1 + s.counts.size());
    x.push_back(static_cast<float>(s.t) / static_cast<float>(horizon));
    for (int c : s.counts) x.push_back(static_cast<float>(static_cast<double>(c) / capacity));
    return x;
}

ExperienceSet generate_experience(const std::vector<Episode>& episodes,
                                  const std::vector<int>& positions,
                                  const ProfileHistory& history, const ExperienceConfig& config) {
    if (config.trajectories_per_episode < 1)
        throw std::invalid_argument("trajectories_per_episode must be >= 1");
    if (!positions.empty() && positions.size() != episodes.size())
        throw std::invalid_argument("positions must match episodes");
    const bool linear = config.cost != CostKind::quadratic;

    ExperienceSet set;
    set.repr = config.repr;
    set.scaling = config.scaling;
    set.cost = config.cost;
    set.window = config.window;
    if (episodes.empty()) return set;
    set.horizon = episodes.front().config.slots_per_episode;
    set.capacity = episodes.front().config.max_stations;

    std::vector<std::vector<RawStep>> per_episode(episodes.size());
    std::vector<char> skipped(episodes.size(), 0);
    parallel_for(episodes.size(), config.jobs, [&](std::size_t i) {
        const auto& episode = episodes[i];
        const int position = positions.empty() ? static_cast<int>(i) : positions[i];
        const int horizon = episode.config.slots_per_episode;
        std::vector<OptimalProfileSet> profile_sets;
        if (linear) {
            try {
                for (int t = 0; t < horizon; ++t)
                    profile_sets.push_back(
                        build_profile_set(t, position, config.window, history, true));
            } catch (const std::invalid_argument&) {
                skipped[i] = 1;
                return;
            }
        }
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(episode.episode_id)));
        const ParkState start = initial_state(episode);
        auto& steps = per_episode[i];
        steps.reserve(static_cast<std::size_t>(config.trajectories_per_episode * horizon));
        for (int traj = 0; traj < config.trajectories_per_episode; ++traj) {
            ParkState park = start;
            while (park.t < horizon) {
                RawStep rs;
                rs.state.t = park.t;
                rs.state.counts = observation_counts(park, config.repr);
                rs.state.flex = flex_counts(park);
                rs.action.u.assign(rs.state.flex.counts.size(), 0);
                rs.action.u[0] = rs.state.flex.counts[0];
                for (std::size_t d = 1; d < rs.action.u.size(); ++d)
                    if (rs.state.flex.counts[d] > 0)
                        rs.action.u[d] =
                            std::uniform_int_distribution<int>(0, rs.state.flex.counts[d])(rng);
                auto result = step(park, rs.action);
                const double p = result.power;
                rs.cost = linear ? cost_of(config.cost, p,
                                           &profile_sets[static_cast<std::size_t>(park.t)])
                                 : cost_quadratic(p);
                park = std::move(result.next);
                rs.next.t = park.t;
                rs.next.counts = observation_counts(park, config.repr);
                rs.next.flex = flex_counts(park);
                rs.next.terminal = is_terminal(park);
                steps.push_back(std::move(rs));
            }
        }
    });

    std::unordered_map<std::string, int> index;
    auto intern = [&](ExperienceState s) {
        const auto key = state_key(s.t, s.counts);
        auto [it, inserted] = index.emplace(key, static_cast<int>(set.states.size()));
        if (inserted) set.states.push_back(std::move(s));
        return it->second;
    };
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        if (skipped[i]) {
            warn("episode " + std::to_string(episodes[i].episode_id) +
                 " has no preceding optimal profile; skipped");
            continue;
        }
        if (linear) {
            const int position = positions.empty() ? static_cast<int>(i) : positions[i];
            int found = 0;
            for (int k = 1; k <= config.window; ++k) found += history.count(position - k) > 0;
            if (found < config.window)
                warn("episode " + std::to_string(episodes[i].episode_id) + " uses " +
                     std::to_string(found) + " of " + std::to_string(config.window) +
                     " preceding profiles");
        }
        for (auto& rs : per_episode[i]) {
            ExperienceTuple tuple;
            tuple.action = scale(rs.action, rs.state.flex, config.scaling, set.capacity);
            tuple.cost = rs.cost;
            tuple.terminal = rs.next.terminal;
            tuple.state = intern(std::move(rs.state));
            tuple.next_state = intern(std::move(rs.next));
            set.tuples.push_back(std::move(tuple));
        }
        per_episode[i].clear();
        per_episode[i].shrink_to_fit();
    }
    return set;
}

void write_experience_jsonl(std::ostream& out, const ExperienceSet& set) {
    using nlohmann::json;
    out << json{{"kind", "header"},
                {"repr", to_string(set.repr)},
                {"scaling", to_string(set.scaling)},
                {"cost", to_string(set.cost)},
                {"window", set.window},
                {"horizon", set.horizon},
                {"capacity", set.capacity}}
               .dump()
        << '\n';
    for (const auto& s : set.states)
        out << json{{"kind", "state"},
                    {"t", s.t},
                    {"counts", s.counts},
                    {"flex", s.flex.counts},
                    {"terminal", s.terminal}}
                   .dump()
            << '\n';
    for (const auto& tup : set.tuples)
        out << json{{"kind", "tuple"},
                    {"state", tup.state},
                    {"action", tup.action.values},
                    {"next_state", tup.next_state},
                    {"cost", tup.cost},
                    {"terminal", tup.terminal}}
                   .dump()
            << '\n';
}

ExperienceSet read_experience_jsonl(std::istream& in) {
    using nlohmann::json;
    ExperienceSet set;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "header") {
            set.repr = parse_state_repr(j.at("repr").get<std::string>());
            set.scaling = parse_scaling(j.at("scaling").get<std::string>());
            set.cost = parse_cost_kind(j.at("cost").get<std::string>());
            set.window = j.at("window").get<int>();
            set.horizon = j.at("horizon").get<int>();
            set.capacity = j.at("capacity").get<int>();
            header = true;
        } else if (kind == "state") {
            ExperienceState s;
            s.t = j.at("t").get<int>();
            s.counts = j.at("counts").get<std::vector<int>>();
            s.flex.counts = j.at("flex").get<std::vector<int>>();
            s.terminal = j.at("terminal").get<bool>();
            set.states.push_back(std::move(s));
        } else if (kind == "tuple") {
            ExperienceTuple t;
            t.state = j.at("state").get<int>();
            t.action.values = j.at("action").get<std::vector<double>>();
            t.action.scaling = set.scaling;
            t.next_state = j.at("next_state").get<int>();
            t.cost = j.at("cost").get<double>();
            t.terminal = j.at("terminal").get<bool>();
            set.tuples.push_back(std::move(t));
        } else {
            throw std::invalid_argument("unknown experience record: " + kind);
        }
    }
    if (!header) throw std::invalid_argument("experience file has no header");
    return set;
}

void FqiConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (trajectories_per_episode < 1)
        throw std::invalid_argument("trajectories_per_episode must be >= 1");
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch_size >= 1");
    if (!(learning_rate > 0.0) || !(huber_delta > 0.0))
        throw std::invalid_argument("learning_rate and huber_delta must be positive");
    if (target_scale < 0.0) throw std::invalid_argument("target_scale must be >= 0");
}

double effective_target_scale(const FqiConfig& config, CostKind cost, int capacity) {
    if (config.target_scale > 0.0) return config.target_scale;
    const double c = static_cast<double>(capacity);
    return cost == CostKind::quadratic ? 1.0 / (c * c) : 1.0 / c;
}

std::vector<FqiIteration> fqi(const ExperienceSet& set, const FqiConfig& config,
                              const IterationCallback& on_iteration) {
    config.validate();
    if (set.tuples.empty()) throw std::invalid_argument("experience set is empty");
    const int width = input_width(set.repr, set.horizon);
    const auto n = static_cast<Eigen::Index>(set.tuples.size());
    const auto s = static_cast<Eigen::Index>(set.horizon);

    Eigen::MatrixXf inputs(width, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& tup = set.tuples[static_cast<std::size_t>(i)];
        const auto prefix = set.state_features(tup.state);
        const auto p = static_cast<Eigen::Index>(prefix.size());
        inputs.col(i).head(p) = Eigen::Map<const Eigen::VectorXf>(prefix.data(), p);
        for (Eigen::Index d = 0; d < s; ++d)
            inputs(p + d, i) = static_cast<float>(tup.action.values[static_cast<std::size_t>(d)]);
    }

    const double cost_scale = effective_target_scale(config, set.cost, set.capacity);
    Eigen::VectorXf scaled_cost(n);
    for (Eigen::Index i = 0; i < n; ++i)
        scaled_cost(i) = static_cast<float>(set.tuples[static_cast<std::size_t>(i)].cost * cost_scale);

    // successor states that need a bootstrap value
    std::vector<int> successors;
    std::vector<int> successor_slot(set.states.size(), -1);
    for (const auto& tup : set.tuples) {
        if (tup.terminal) continue;
        auto& slot = successor_slot[static_cast<std::size_t>(tup.next_state)];
        if (slot < 0) {
            slot = static_cast<int>(successors.size());
            successors.push_back(tup.next_state);
        }
    }
    std::vector<std::vector<ActionCounts>> successor_actions(successors.size());
    for (std::size_t k = 0; k < successors.size(); ++k)
        successor_actions[k] =
            enumerate_actions(set.states[static_cast<std::size_t>(successors[k])].flex,
                              config.action_cap);

    QNetwork net = QNetwork::random(width, config.hidden, derive_seed(config.seed, 0));
    std::vector<FqiIteration> out;
    std::vector<float> best(successors.size(), 0.0F);
    for (int iter = 1; iter <= config.iterations; ++iter) {
        const auto start = std::chrono::steady_clock::now();
        Eigen::VectorXf targets = scaled_cost;
        if (iter > 1) {
            const QNetwork& prev = out.back().net;
            parallel_for(successors.size(), config.jobs, [&](std::size_t k) {
                const int idx = successors[k];
                const auto prefix = set.state_features(idx);
                const auto suffix =
                    scaled_action_matrix(successor_actions[k],
                                         set.states[static_cast<std::size_t>(idx)].flex,
                                         set.scaling, set.capacity);
                best[k] = prev.forward_shared_prefix(prefix, suffix).minCoeff();
            });
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& tup = set.tuples[static_cast<std::size_t>(i)];
                if (!tup.terminal)
                    targets(i) += best[static_cast<std::size_t>(
                        successor_slot[static_cast<std::size_t>(tup.next_state)])];
            }
        }
        TrainConfig tc;
        tc.epochs = config.epochs;
        tc.batch_size = config.batch_size;
        tc.learning_rate = config.learning_rate;
        tc.huber_delta = config.huber_delta;
        tc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(iter));
        const auto stats = train_network(net, inputs, targets, tc);
        const auto stop = std::chrono::steady_clock::now();
        out.push_back({net, std::chrono::duration<double>(stop - start).count(), stats.final_loss});
        if (on_iteration) on_iteration(iter, out.back().net);
    }
    return out;
}

ActionCounts greedy_policy(const QNetwork& net, const ParkState& park, StateRepr repr,
                           Scaling scaling, long long action_cap) {
    const FlexCounts flex = flex_counts(park);
    const auto actions = enumerate_actions(flex, action_cap);
    if (actions.size() == 1) return actions.front();
    const auto prefix = encode_state(park, repr);
    const auto q = net.forward_shared_prefix(
        prefix, scaled_action_matrix(actions, flex, scaling, park.capacity));
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.size(); ++a)
        if (q(a) < q(best)) best = a;
    return actions[static_cast<std::size_t>(best)];
}

}  // namespace evfqi
