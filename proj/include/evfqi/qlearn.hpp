#pragma once

#include "evfqi/costs.hpp"
#include "evfqi/environment.hpp"
#include "evfqi/qnetwork.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace evfqi {

/// Encoded width: 1 + S^2 + S for matrix states, 1 + S + S for vector states.
int input_width(StateRepr repr, int horizon);

/// [t / S] ++ observation (matrix rows concatenated) ++ scaled action.
std::vector<float> encode_input(int t, const MatrixObservation& obs, const ScaledAction& a);
std::vector<float> encode_input(int t, const VectorObservation& obs, const ScaledAction& a);

/// The state part of the encoding: [t / S] ++ observation.
std::vector<float> encode_state(const ParkState& park, StateRepr repr);

/// One aggregate state of an experience set. `counts` holds the raw
/// observation counts (grid cells or flexibility bins) before division by N_max.
struct ExperienceState {
    int t = 0;
    std::vector<int> counts;
    FlexCounts flex;
    bool terminal = false;
};

struct ExperienceTuple {
    int state = 0;       // index into ExperienceSet::states
    ScaledAction action;
    int next_state = 0;  // index into ExperienceSet::states
    double cost = 0.0;
    bool terminal = false;
};

struct ExperienceSet {
    StateRepr repr = StateRepr::vector;
    Scaling scaling = Scaling::local;
    CostKind cost = CostKind::quadratic;
    int window = 1;  // E, linear costs only
    int horizon = 12;
    int capacity = 10;
    std::vector<ExperienceState> states;  // deduplicated
    std::vector<ExperienceTuple> tuples;

    /// Feature prefix [t / S] ++ observation of a stored state.
    std::vector<float> state_features(int index) const;
};

struct ExperienceConfig {
    StateRepr repr = StateRepr::vector;
    Scaling scaling = Scaling::local;
    CostKind cost = CostKind::quadratic;
    int window = 1;
    int trajectories_per_episode = 200;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Random-policy rollouts from each episode's initial state, actions drawn
/// uniformly from the feasible set. `positions[i]` is the position of
/// episodes[i] in the ordering that `history` is keyed by; an empty vector
/// means positions 0..n-1. Linear-cost episodes without any preceding
/// profile are skipped with a warning. Trajectory randomness depends only on
/// (seed, episode_id), so different encodings see identical rollouts.
ExperienceSet generate_experience(const std::vector<Episode>& episodes,
                                  const std::vector<int>& positions,
                                  const ProfileHistory& history, const ExperienceConfig& config);

void write_experience_jsonl(std::ostream& out, const ExperienceSet& set);
ExperienceSet read_experience_jsonl(std::istream& in);

struct FqiConfig {
    int iterations = 12;
    int trajectories_per_episode = 200;
    int epochs = 8;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double huber_delta = 1.0;
    std::vector<int> hidden = {128, 64};
    /// Multiplier applied to costs before regression; 0 selects 1/N_max^2 for
    /// quadratic cost and 1/N_max for linear costs.
    double target_scale = 0.0;
    long long action_cap = 50'000;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

double effective_target_scale(const FqiConfig& config, CostKind cost, int capacity);

struct FqiIteration {
    QNetwork net;
    double seconds = 0.0;  // target computation + fitting
    double train_loss = 0.0;
};

/// Called after every iteration with (1-based iteration, fitted net).
using IterationCallback = std::function<void(int, const QNetwork&)>;

/// Fitted Q-iteration with warm-started networks. Iteration 1 regresses the
/// cost; iteration k regresses cost + min over successor actions of the
/// previous iterate (cost only on terminal transitions). Undiscounted.
std::vector<FqiIteration> fqi(const ExperienceSet& set, const FqiConfig& config,
                              const IterationCallback& on_iteration = {});

/// Lowest-Q feasible action; ties go to the lexicographically smallest action.
ActionCounts greedy_policy(const QNetwork& net, const ParkState& park, StateRepr repr,
                           Scaling scaling, long long action_cap = 50'000);

}  // namespace evfqi
