#include "evfqi/costs.hpp"

#include "evfqi/log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evfqi {

std::string to_string(CostKind kind) {
    switch (kind) {
        case CostKind::quadratic: return "quadratic";
        case CostKind::linear_avg: return "linear-avg";
        case CostKind::linear_median: return "linear-med";
    }
    return "?";
}

CostKind parse_cost_kind(const std::string& text) {
    if (text == "quadratic") return CostKind::quadratic;
    if (text == "linear-avg") return CostKind::linear_avg;
    if (text == "linear-med" || text == "linear-median") return CostKind::linear_median;
    throw std::invalid_argument("unknown cost function: " + text);
}

double PowerProfile::total() const { return std::accumulate(power.begin(), power.end(), 0.0); }

std::string profile_to_json(const PowerProfile& profile) {
    return nlohmann::json{{"episode_id", profile.episode_id}, {"power", profile.power}}.dump();
}

PowerProfile profile_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    PowerProfile p;
    p.episode_id = j.at("episode_id").get<int>();
    p.power = j.at("power").get<std::vector<double>>();
    return p;
}

double power(const FlexCounts& n, const ScaledAction& local_action) {
    if (local_action.scaling != Scaling::local)
        throw std::invalid_argument("power() expects a locally scaled action");
    double p = 0.0;
    for (std::size_t d = 0; d < n.counts.size(); ++d) p += n.counts[d] * local_action.values[d];
    return p;
}

double cost_quadratic(double p) { return p * p; }

double mean_of(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("mean of an empty set");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

double cost_linear_avg(double p, const OptimalProfileSet& set) {
    if (set.values.empty()) throw std::invalid_argument("insufficient history for linear cost");
    return std::abs(p - mean_of(set.values));
}

double cost_linear_median(double p, const OptimalProfileSet& set) {
    if (set.values.empty()) throw std::invalid_argument("insufficient history for linear cost");
    return std::abs(p - median_of(set.values));
}

double cost_of(CostKind kind, double p, const OptimalProfileSet* set) {
    if (kind == CostKind::quadratic) return cost_quadratic(p);
    if (set == nullptr) throw std::invalid_argument("linear cost needs an optimal-profile set");
    return kind == CostKind::linear_avg ? cost_linear_avg(p, *set) : cost_linear_median(p, *set);
}

OptimalProfileSet build_profile_set(int t, int e, int window, const ProfileHistory& history,
                                    bool quiet) {
    if (window < 1) throw std::invalid_argument("window E must be >= 1");
    OptimalProfileSet set;
    set.t = t;
    set.e = e;
    set.window = window;
    for (int k = 1; k <= window; ++k) {
        const auto it = history.find(e - k);
        if (it == history.end()) continue;
        const auto& power = it->second.power;
        if (t < 0 || static_cast<std::size_t>(t) >= power.size())
            throw std::out_of_range("slot " + std::to_string(t) + " outside stored profile");
        set.values.push_back(power[static_cast<std::size_t>(t)]);
    }
    if (set.values.empty())
        throw std::invalid_argument("no optimal profile precedes episode position " +
                                    std::to_string(e));
    if (!quiet && set.values.size() < static_cast<std::size_t>(window))
        warn("profile set for position " + std::to_string(e) + " has " +
             std::to_string(set.values.size()) + " of " + std::to_string(window) + " episodes");
    return set;
}

}  // namespace evfqi
