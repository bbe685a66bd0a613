#include "evfqi/oracle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace evfqi {

namespace {

struct Arc {
    int to;
    int cap;
    long long cost;
};

class FlowGraph {
public:
    explicit FlowGraph(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

    int add_arc(int from, int to, int cap, long long cost) {
        const int id = static_cast<int>(arcs_.size());
        arcs_.push_back({to, cap, cost});
        arcs_.push_back({from, 0, -cost});
        adj_[static_cast<std::size_t>(from)].push_back(id);
        adj_[static_cast<std::size_t>(to)].push_back(id + 1);
        return id;
    }

    int flow_on(int id) const { return arcs_[static_cast<std::size_t>(id) ^ 1U].cap; }

    // Sends one unit along a cheapest residual path. Bellman-Ford in FIFO
    // order handles the negative reverse arcs; only strict improvements
    // replace a label, so the first (lowest-index) path wins ties.
    bool augment_unit(int source, int sink) {
        const auto n = adj_.size();
        constexpr long long inf = std::numeric_limits<long long>::max() / 4;
        std::vector<long long> dist(n, inf);
        std::vector<int> via(n, -1);
        std::vector<bool> queued(n, false);
        std::vector<int> queue{source};
        dist[static_cast<std::size_t>(source)] = 0;
        queued[static_cast<std::size_t>(source)] = true;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const auto u = static_cast<std::size_t>(queue[head]);
            queued[u] = false;
            for (int id : adj_[u]) {
                const auto& a = arcs_[static_cast<std::size_t>(id)];
                if (a.cap <= 0) continue;
                const auto v = static_cast<std::size_t>(a.to);
                if (dist[u] + a.cost < dist[v]) {
                    dist[v] = dist[u] + a.cost;
                    via[v] = id;
                    if (!queued[v]) {
                        queued[v] = true;
                        queue.push_back(a.to);
                    }
                }
            }
        }
        if (dist[static_cast<std::size_t>(sink)] >= inf) return false;
        for (int v = sink; v != source;) {
            const int id = via[static_cast<std::size_t>(v)];
            arcs_[static_cast<std::size_t>(id)].cap -= 1;
            arcs_[static_cast<std::size_t>(id) ^ 1U].cap += 1;
            v = arcs_[static_cast<std::size_t>(id) ^ 1U].to;
        }
        return true;
    }

private:
    std::vector<Arc> arcs_;
    std::vector<std::vector<int>> adj_;
};

long long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

ScheduleResult solve_optimal(const Episode& episode) {
    validate_episode(episode);
    const int n = static_cast<int>(episode.sessions.size());
    const int horizon = episode.config.slots_per_episode;
    const int source = 0;
    const int sink = n + horizon + 1;
    auto slot_node = [n](int t) { return n + 1 + t; };

    FlowGraph graph(sink + 1);
    std::vector<std::vector<std::pair<int, int>>> session_arcs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& s = episode.sessions[static_cast<std::size_t>(i)];
        graph.add_arc(source, 1 + i, s.required_slots, 0);
        for (int t = s.arrival_slot; t < s.depart_slot; ++t)
            session_arcs[static_cast<std::size_t>(i)].emplace_back(
                t, graph.add_arc(1 + i, slot_node(t), 1, 0));
    }
    const auto concurrency = episode.concurrency();
    for (int t = 0; t < horizon; ++t)
        for (int k = 1; k <= concurrency[static_cast<std::size_t>(t)]; ++k)
            graph.add_arc(slot_node(t), sink, 1, 2LL * k - 1);

    const int demand = episode.total_demand();
    for (int unit = 0; unit < demand; ++unit)
        if (!graph.augment_unit(source, sink))
            throw std::runtime_error("episode " + std::to_string(episode.episode_id) +
                                     " has no feasible schedule");

    Schedule schedule;
    schedule.slots.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (const auto& [t, id] : session_arcs[static_cast<std::size_t>(i)])
            if (graph.flow_on(id) > 0) schedule.slots[static_cast<std::size_t>(i)].push_back(t);
    return evaluate_schedule(episode, std::move(schedule));
}

long long brute_force_optimal(const Episode& episode, long long limit) {
    validate_episode(episode);
    long long space = 1;
    for (const auto& s : episode.sessions) {
        space *= binomial(s.window(), s.required_slots);
        if (space > limit)
            throw std::length_error("brute force search space exceeds " + std::to_string(limit) +
                                    " schedules; use solve_optimal");
    }
    const auto& sessions = episode.sessions;
    std::vector<long long> load(static_cast<std::size_t>(episode.config.slots_per_episode), 0);
    long long best = std::numeric_limits<long long>::max();

    // Chooses slots for session i one at a time, from `next_slot` upward.
    auto search = [&](auto&& self, std::size_t i, int remaining, int next_slot) -> void {
        if (i == sessions.size()) {
            long long total = 0;
            for (long long l : load) total += l * l;
            best = std::min(best, total);
            return;
        }
        const auto& s = sessions[i];
        if (remaining == 0) {
            const int next_req = i + 1 < sessions.size() ? sessions[i + 1].required_slots : 0;
            const int next_start = i + 1 < sessions.size() ? sessions[i + 1].arrival_slot : 0;
            self(self, i + 1, next_req, next_start);
            return;
        }
        for (int t = next_slot; t <= s.depart_slot - remaining; ++t) {
            ++load[static_cast<std::size_t>(t)];
            self(self, i, remaining - 1, t + 1);
            --load[static_cast<std::size_t>(t)];
        }
    };
    if (sessions.empty()) return 0;
    search(search, 0, sessions[0].required_slots, sessions[0].arrival_slot);
    return best;
}

bool is_exchange_optimal(const Episode& episode, const Schedule& schedule) {
    const auto result = evaluate_schedule(episode, schedule);
    const auto& power = result.profile.power;
    for (std::size_t i = 0; i < episode.sessions.size(); ++i) {
        const auto& s = episode.sessions[i];
        const auto& used = schedule.slots[i];
        for (int from : used)
            for (int to = s.arrival_slot; to < s.depart_slot; ++to) {
                if (std::find(used.begin(), used.end(), to) != used.end()) continue;
                // moving one unit changes the load by 2(p_to - p_from + 1)
                if (power[static_cast<std::size_t>(to)] + 1.0 < power[static_cast<std::size_t>(from)])
                    return false;
            }
    }
    return true;
}

std::string schedule_to_json(const Episode& episode, const Schedule& schedule) {
    nlohmann::json sessions = nlohmann::json::array();
    for (std::size_t i = 0; i < episode.sessions.size(); ++i)
        sessions.push_back({{"station", episode.sessions[i].station_id},
                            {"slots", schedule.slots[i]}});
    return nlohmann::json{{"episode_id", episode.episode_id}, {"sessions", sessions}}.dump();
}

}  // namespace evfqi
