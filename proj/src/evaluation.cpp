#include "evfqi/evaluation.hpp"

#include "evfqi/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

namespace evfqi {

double episode_load(const PowerProfile& profile) {
    double total = 0.0;
    for (double p : profile.power) total += p * p;
    return total;
}

double normalized_load(double load_pi, double load_opt) {
    if (load_opt == 0.0) {
        if (load_pi == 0.0) return 1.0;
        throw std::invalid_argument("optimal load is zero but policy load is not");
    }
    return load_pi / load_opt;
}

RolloutResult rollout(const Policy& policy, const Episode& episode) {
    RolloutResult r;
    r.profile.episode_id = episode.episode_id;
    r.profile.power.assign(static_cast<std::size_t>(episode.config.slots_per_episode), 0.0);
    ParkState park = initial_state(episode);
    while (park.t < park.horizon) {
        r.max_concurrency = std::max(r.max_concurrency, park.size());
        if (park.size() > park.capacity)
            throw std::logic_error("park exceeds capacity in episode " +
                                   std::to_string(episode.episode_id));
        const int t = park.t;
        auto next = step(park, policy(park));
        r.profile.power[static_cast<std::size_t>(t)] = next.power;
        park = std::move(next.next);
    }
    if (!is_terminal(park) || static_cast<int>(r.profile.total()) != episode.total_demand())
        throw std::logic_error("unmet charging demand in episode " +
                               std::to_string(episode.episode_id));
    return r;
}

Policy bau_policy() {
    return [](const ParkState& park) { return ActionCounts{flex_counts(park).counts}; };
}

Policy random_policy(std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng](const ParkState& park) {
        const auto n = flex_counts(park);
        ActionCounts u{std::vector<int>(n.counts.size(), 0)};
        u.u[0] = n.counts[0];
        for (std::size_t d = 1; d < n.counts.size(); ++d)
            if (n.counts[d] > 0) u.u[d] = std::uniform_int_distribution<int>(0, n.counts[d])(*rng);
        return u;
    };
}

namespace {

struct Job {
    int first = 0;  // absolute slots [first, last)
    int last = 0;
    int units = 0;
};

// Bipartite flow between jobs and slots where every slot s must absorb
// exactly target[s] units and each job at most one unit per slot.
bool admits_profile(const std::vector<Job>& jobs, const std::vector<int>& target, int from) {
    const int slots = static_cast<int>(target.size());
    int demand = 0;
    int supply = 0;
    for (const auto& j : jobs) demand += j.units;
    for (int s = from; s < slots; ++s) supply += target[static_cast<std::size_t>(s)];
    if (demand != supply) return false;

    std::vector<int> free_cap(target.begin(), target.end());
    std::vector<std::vector<int>> owner(static_cast<std::size_t>(slots));  // job per used unit
    std::vector<std::vector<char>> used(jobs.size(), std::vector<char>(static_cast<std::size_t>(slots), 0));
    std::vector<char> seen;

    // Augmenting path from job `j`: take a free slot in its window, or steal
    // a slot from another job that can move elsewhere.
    std::function<bool(std::size_t)> augment = [&](std::size_t j) {
        for (int s = std::max(jobs[j].first, from); s < jobs[j].last; ++s) {
            const auto su = static_cast<std::size_t>(s);
            if (used[j][su] || seen[su]) continue;
            seen[su] = 1;
            if (free_cap[su] > 0) {
                --free_cap[su];
                used[j][su] = 1;
                owner[su].push_back(static_cast<int>(j));
                return true;
            }
            for (auto& other : owner[su]) {
                const auto o = static_cast<std::size_t>(other);
                used[o][su] = 0;
                if (augment(o)) {
                    other = static_cast<int>(j);
                    used[j][su] = 1;
                    return true;
                }
                used[o][su] = 1;
            }
        }
        return false;
    };

    for (std::size_t j = 0; j < jobs.size(); ++j)
        for (int k = 0; k < jobs[j].units; ++k) {
            seen.assign(static_cast<std::size_t>(slots), 0);
            if (!augment(j)) return false;
        }
    return true;
}

std::vector<Job> remaining_jobs(const ParkState& park) {
    std::vector<Job> jobs;
    for (const auto& ev : park.connected)
        jobs.push_back({park.t, park.t + ev.depart_remaining, ev.charge_remaining});
    if (park.pending)
        for (std::size_t s = static_cast<std::size_t>(park.t) + 1; s < park.pending->size(); ++s)
            for (const auto& ev : (*park.pending)[s])
                jobs.push_back({static_cast<int>(s), static_cast<int>(s) + ev.depart_remaining,
                                ev.charge_remaining});
    return jobs;
}

bool plan_from(const ParkState& park, const std::vector<int>& target,
               std::vector<ActionCounts>& plan) {
    if (park.t >= park.horizon) return park.connected.empty();
    if (!admits_profile(remaining_jobs(park), target, park.t)) return false;
    const int want = target[static_cast<std::size_t>(park.t)];
    for (auto& u : enumerate_actions(flex_counts(park))) {
        if (u.total() != want) continue;
        auto next = step(park, u);
        plan.push_back(std::move(u));
        if (plan_from(next.next, target, plan)) return true;
        plan.pop_back();
    }
    return false;
}

}  // namespace

std::optional<std::vector<ActionCounts>> realize_profile(const ParkState& park,
                                                         const PowerProfile& profile) {
    std::vector<int> target;
    for (double p : profile.power) target.push_back(static_cast<int>(std::lround(p)));
    if (static_cast<int>(target.size()) != park.horizon)
        throw std::invalid_argument("profile has " + std::to_string(target.size()) +
                                    " slots, park has " + std::to_string(park.horizon));
    std::vector<ActionCounts> plan;
    if (!plan_from(park, target, plan)) return std::nullopt;
    return plan;
}

Policy profile_replay_policy(PowerProfile profile) {
    return [profile = std::move(profile)](const ParkState& park) {
        if (auto plan = realize_profile(park, profile)) return plan->front();
        const auto n = flex_counts(park);
        ActionCounts u{std::vector<int>(n.counts.size(), 0)};
        int budget = static_cast<int>(std::lround(profile.power.at(static_cast<std::size_t>(park.t))));
        for (std::size_t d = 0; d < n.counts.size(); ++d) {
            u.u[d] = d == 0 ? n.counts[0] : std::clamp(budget, 0, n.counts[d]);
            budget -= u.u[d];
        }
        return u;
    };
}

Policy greedy_net_policy(const QNetwork& net, StateRepr repr, Scaling scaling) {
    auto shared = std::make_shared<const QNetwork>(net);
    return [shared, repr, scaling](const ParkState& park) {
        return greedy_policy(*shared, park, repr, scaling);
    };
}

std::vector<double> signed_rank_null_counts(const std::vector<int>& doubled_ranks) {
    const int total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0);
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int r : doubled_ranks) {
        for (int w = reach; w >= 0; --w)
            counts[static_cast<std::size_t>(w + r)] += counts[static_cast<std::size_t>(w)];
        reach += r;
    }
    return counts;
}

namespace {

struct RankedDiffs {
    std::vector<double> diffs;    // non-zero, sorted by magnitude
    std::vector<int> doubled;     // 2 * average rank
    std::vector<int> tie_sizes;
    double w_plus = 0.0;
};

RankedDiffs rank_differences(const std::vector<std::pair<double, double>>& pairs) {
    RankedDiffs r;
    for (const auto& [a, b] : pairs) {
        const double d = a - b;
        if (d != 0.0) r.diffs.push_back(d);
    }
    if (r.diffs.size() < 5)
        throw std::invalid_argument("signed-rank test needs at least 5 non-zero differences, got " +
                                    std::to_string(r.diffs.size()));
    std::sort(r.diffs.begin(), r.diffs.end(),
              [](double x, double y) { return std::abs(x) < std::abs(y); });
    const std::size_t n = r.diffs.size();
    r.doubled.assign(n, 0);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(r.diffs[j + 1]) == std::abs(r.diffs[i])) ++j;
        // 1-based positions i+1..j+1 share rank (i+j+2)/2
        for (std::size_t k = i; k <= j; ++k) r.doubled[k] = static_cast<int>(i + j + 2);
        r.tie_sizes.push_back(static_cast<int>(j - i + 1));
        i = j + 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        if (r.diffs[k] > 0) r.w_plus += r.doubled[k] / 2.0;
    return r;
}

WilcoxonResult normal_branch(const RankedDiffs& r) {
    const double n = static_cast<double>(r.diffs.size());
    const double mean = n * (n + 1) / 4.0;
    double var = n * (n + 1) * (2 * n + 1) / 24.0;
    for (int t : r.tie_sizes) var -= (static_cast<double>(t) * t * t - t) / 48.0;
    WilcoxonResult out;
    out.n = static_cast<int>(r.diffs.size());
    out.w_plus = r.w_plus;
    out.exact = false;
    const double dev = std::abs(r.w_plus - mean) - 0.5;
    if (dev <= 0.0 || var <= 0.0) {
        out.p_value = 1.0;
        return out;
    }
    const double z = dev / std::sqrt(var);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

}  // namespace

WilcoxonResult wilcoxon_normal_approx(const std::vector<std::pair<double, double>>& pairs) {
    return normal_branch(rank_differences(pairs));
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs,
                                    int exact_cutoff) {
    const RankedDiffs r = rank_differences(pairs);
    if (static_cast<int>(r.diffs.size()) > exact_cutoff) return normal_branch(r);

    const auto counts = signed_rank_null_counts(r.doubled);
    const double total = std::pow(2.0, static_cast<double>(r.diffs.size()));
    const auto w2 = static_cast<std::size_t>(std::lround(2.0 * r.w_plus));
    double lower = 0.0, upper = 0.0;
    for (std::size_t w = 0; w < counts.size(); ++w) {
        if (w <= w2) lower += counts[w];
        if (w >= w2) upper += counts[w];
    }
    WilcoxonResult out;
    out.n = static_cast<int>(r.diffs.size());
    out.w_plus = r.w_plus;
    out.exact = true;
    out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return out;
}

namespace {
std::string split_label(int a, int b, int c, int d) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "train%03d-%03d_test%03d-%03d", a + 1, b, c + 1, d);
    return buf;
}
}  // namespace

std::vector<ValidationSplit> increasing_windows(int total_episodes, int block, int max_train) {
    if (block < 1) throw std::invalid_argument("block must be >= 1");
    if (total_episodes < 2 * block)
        throw std::invalid_argument("increasing windows need at least " +
                                    std::to_string(2 * block) + " episodes");
    std::vector<ValidationSplit> out;
    for (int train = block; train <= max_train && train + block <= total_episodes; train += block)
        out.push_back({0, train, train, train + block, split_label(0, train, train, train + block)});
    return out;
}

std::vector<ValidationSplit> rolling_windows(int weekday_episodes, int train, int test,
                                             int stride) {
    if (train < 1 || test < 1 || stride < 1)
        throw std::invalid_argument("window sizes must be >= 1");
    if (weekday_episodes < train + test)
        throw std::invalid_argument("rolling windows need at least " +
                                    std::to_string(train + test) + " weekday episodes");
    std::vector<ValidationSplit> out;
    for (int off = 0; off + train + test <= weekday_episodes; off += stride)
        out.push_back({off, off + train, off + train, off + train + test,
                       split_label(off, off + train, off + train, off + train + test)});
    return out;
}

}  // namespace evfqi
