#pragma once

#include "evfqi/costs.hpp"
#include "evfqi/environment.hpp"
#include "evfqi/qnetwork.hpp"
#include "evfqi/schedule.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace evfqi {

double episode_load(const PowerProfile& profile);

/// L_pi / L_opt; 1 when both are zero. Throws std::invalid_argument if only
/// L_opt is zero.
double normalized_load(double load_pi, double load_opt);

using Policy = std::function<ActionCounts(const ParkState&)>;

struct RolloutResult {
    PowerProfile profile;
    int max_concurrency = 0;
};

/// Runs `policy` through the episode. Throws std::logic_error if any session
/// leaves with unmet demand or the park exceeds its capacity.
RolloutResult rollout(const Policy& policy, const Episode& episode);

/// Charges every connected EV.
Policy bau_policy();
/// Uniformly random feasible action; the generator is owned by the policy.
Policy random_policy(std::uint64_t seed);
/// Action sequence from `park` whose powers match `profile` slot for slot,
/// or nullopt when the aggregate action space cannot reproduce it. Within a
/// flexibility bin the environment picks earliest deadlines, so some
/// individually feasible profiles are out of reach.
std::optional<std::vector<ActionCounts>> realize_profile(const ParkState& park,
                                                         const PowerProfile& profile);
/// Follows realize_profile when it succeeds; otherwise charges power[t] EVs
/// least flexible first.
Policy profile_replay_policy(PowerProfile profile);
Policy greedy_net_policy(const QNetwork& net, StateRepr repr, Scaling scaling);

struct WilcoxonResult {
    double p_value = 1.0;
    double w_plus = 0.0;  // sum of ranks of positive differences
    int n = 0;            // non-zero differences
    bool exact = false;
};

/// Number of sign assignments producing each doubled rank sum, given doubled
/// ranks (so tied average ranks stay integral). Index = 2 * W+.
std::vector<double> signed_rank_null_counts(const std::vector<int>& doubled_ranks);

/// Two-sided signed-rank test on differences a - b. Zero differences are
/// dropped and tied magnitudes get average ranks. Exact null distribution
/// for n <= exact_cutoff, otherwise a normal approximation with continuity
/// and tie correction. Throws std::invalid_argument with fewer than 5
/// non-zero differences.
WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs,
                                    int exact_cutoff = 12);

/// Normal-approximation branch, exposed for cross-checking the exact one.
WilcoxonResult wilcoxon_normal_approx(const std::vector<std::pair<double, double>>& pairs);

/// Episodes [train_begin, train_end) train, [test_begin, test_end) test;
/// positions refer to the (possibly weekday-filtered) ordering.
struct ValidationSplit {
    int train_begin = 0;
    int train_end = 0;
    int test_begin = 0;
    int test_end = 0;
    std::string label;
};

/// Training sets of block, 2*block, ... up to max_train episodes, each tested
/// on the next `block` episodes.
std::vector<ValidationSplit> increasing_windows(int total_episodes, int block = 30,
                                                int max_train = 270);

/// Fixed-size train/test windows advancing by `stride`.
std::vector<ValidationSplit> rolling_windows(int weekday_episodes, int train = 90, int test = 30,
                                             int stride = 30);

}  // namespace evfqi
