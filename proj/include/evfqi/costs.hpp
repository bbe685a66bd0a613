#pragma once

#include "evfqi/environment.hpp"

#include <map>
#include <string>
#include <vector>

namespace evfqi {

enum class CostKind { quadratic, linear_avg, linear_median };

std::string to_string(CostKind kind);
/// Accepts "quadratic", "linear-avg", "linear-med" (and "linear-median").
CostKind parse_cost_kind(const std::string& text);

struct PowerProfile {
    int episode_id = 0;
    std::vector<double> power;

    double total() const;
    bool operator==(const PowerProfile&) const = default;
};

std::string profile_to_json(const PowerProfile& profile);
PowerProfile profile_from_json(const std::string& line);

/// Oracle powers of the preceding episodes at one slot.
struct OptimalProfileSet {
    int t = 0;
    int e = 0;
    int window = 1;  // E
    std::vector<double> values;
};

/// Optimal profiles keyed by position in the episode ordering that defines
/// "preceding" (the weekday-filtered order in rolling experiments).
using ProfileHistory = std::map<int, PowerProfile>;

/// Sum over bins of N_d times the locally scaled action.
double power(const FlexCounts& n, const ScaledAction& local_action);

double cost_quadratic(double p);
double cost_linear_avg(double p, const OptimalProfileSet& set);
double cost_linear_median(double p, const OptimalProfileSet& set);
double cost_of(CostKind kind, double p, const OptimalProfileSet* set);

double mean_of(const std::vector<double>& values);
/// Mean of the middle pair for even sizes.
double median_of(std::vector<double> values);

/// Collects P_opt(t, e-1) .. P_opt(t, e-E), skipping positions absent from the
/// history. Throws std::invalid_argument when nothing precedes e; warns when
/// fewer than E values are found unless `quiet`.
OptimalProfileSet build_profile_set(int t, int e, int window, const ProfileHistory& history,
                                    bool quiet = false);

}  // namespace evfqi
