#include "evfqi/environment.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace evfqi {

std::string to_string(StateRepr repr) { return repr == StateRepr::matrix ? "matrix" : "vector"; }
std::string to_string(Scaling scaling) { return scaling == Scaling::local ? "local" : "global"; }

StateRepr parse_state_repr(const std::string& text) {
    if (text == "matrix") return StateRepr::matrix;
    if (text == "vector") return StateRepr::vector;
    throw std::invalid_argument("unknown state representation: " + text);
}

Scaling parse_scaling(const std::string& text) {
    if (text == "local") return Scaling::local;
    if (text == "global") return Scaling::global;
    throw std::invalid_argument("unknown action scaling: " + text);
}

ParkState initial_state(const Episode& episode) {
    const int horizon = episode.config.slots_per_episode;
    auto arrivals = std::make_shared<ArrivalSchedule>(static_cast<std::size_t>(horizon + 1));
    int id = 0;
    for (const auto& s : episode.sessions) {
        ConnectedEv ev;
        ev.depart_remaining = s.depart_slot - s.arrival_slot;
        ev.charge_remaining = s.required_slots;
        ev.ev_id = id++;
        (*arrivals)[static_cast<std::size_t>(s.arrival_slot)].push_back(ev);
    }
    ParkState park;
    park.t = 0;
    park.horizon = horizon;
    park.capacity = episode.config.max_stations;
    park.episode_id = episode.episode_id;
    park.connected = (*arrivals)[0];
    park.pending = std::move(arrivals);
    return park;
}

ParkState make_park(int t, int horizon, int capacity, std::vector<ConnectedEv> evs) {
    ParkState park;
    park.t = t;
    park.horizon = horizon;
    park.capacity = capacity;
    for (std::size_t i = 0; i < evs.size(); ++i) evs[i].ev_id = static_cast<int>(i);
    park.connected = std::move(evs);
    park.pending = std::make_shared<ArrivalSchedule>(static_cast<std::size_t>(horizon + 1));
    return park;
}

MatrixObservation observe_matrix(const ParkState& park) {
    MatrixObservation obs;
    obs.t = park.t;
    obs.size = park.horizon;
    obs.grid.assign(static_cast<std::size_t>(park.horizon * park.horizon), 0.0);
    for (const auto& ev : park.connected)
        obs.grid[static_cast<std::size_t>((ev.depart_remaining - 1) * park.horizon +
                                          (ev.charge_remaining - 1))] += 1.0;
    for (double& cell : obs.grid) cell /= park.capacity;
    return obs;
}

VectorObservation observe_vector(const ParkState& park) {
    VectorObservation obs;
    obs.t = park.t;
    obs.bins.assign(static_cast<std::size_t>(park.horizon), 0.0);
    for (const auto& ev : park.connected) obs.bins[static_cast<std::size_t>(ev.flex())] += 1.0;
    for (double& bin : obs.bins) bin /= park.capacity;
    return obs;
}

int FlexCounts::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }
int ActionCounts::total() const { return std::accumulate(u.begin(), u.end(), 0); }

FlexCounts flex_counts(const ParkState& park) {
    FlexCounts n;
    n.counts.assign(static_cast<std::size_t>(park.horizon), 0);
    for (const auto& ev : park.connected) ++n.counts[static_cast<std::size_t>(ev.flex())];
    return n;
}

long long action_space_size(const FlexCounts& n) {
    long long size = 1;
    for (std::size_t d = 1; d < n.counts.size(); ++d) size *= n.counts[d] + 1;
    return size;
}

std::vector<ActionCounts> enumerate_actions(const FlexCounts& n, long long cap) {
    const long long size = action_space_size(n);
    if (size > cap) {
        std::ostringstream msg;
        msg << "action space of " << size << " exceeds cap " << cap << " for flex counts [";
        for (std::size_t d = 0; d < n.counts.size(); ++d) msg << (d ? "," : "") << n.counts[d];
        msg << "]";
        throw std::length_error(msg.str());
    }
    std::vector<ActionCounts> out;
    out.reserve(static_cast<std::size_t>(size));
    ActionCounts u;
    u.u.assign(n.counts.size(), 0);
    if (!n.counts.empty()) u.u[0] = n.counts[0];
    // odometer over bins 1..S-1, most significant digit first
    for (;;) {
        out.push_back(u);
        std::size_t d = n.counts.size();
        while (d > 1) {
            --d;
            if (u.u[d] < n.counts[d]) {
                ++u.u[d];
                break;
            }
            u.u[d] = 0;
            if (d == 1) return out;
        }
        if (n.counts.size() <= 1) return out;
    }
}

void check_action(const ActionCounts& u, const FlexCounts& n) {
    if (u.u.size() != n.counts.size())
        throw std::invalid_argument("action has " + std::to_string(u.u.size()) +
                                    " bins, state has " + std::to_string(n.counts.size()));
    for (std::size_t d = 0; d < n.counts.size(); ++d) {
        if (u.u[d] < 0 || u.u[d] > n.counts[d])
            throw std::invalid_argument("action u[" + std::to_string(d) + "] = " +
                                        std::to_string(u.u[d]) + " outside [0, " +
                                        std::to_string(n.counts[d]) + "]");
    }
    if (!n.counts.empty() && u.u[0] != n.counts[0])
        throw std::invalid_argument("action must charge all " + std::to_string(n.counts[0]) +
                                    " zero-flexibility EVs, got " + std::to_string(u.u[0]));
}

ScaledAction scale(const ActionCounts& u, const FlexCounts& n, Scaling mode, int capacity) {
    ScaledAction a;
    a.scaling = mode;
    a.values.assign(u.u.size(), 0.0);
    for (std::size_t d = 0; d < u.u.size(); ++d) {
        if (mode == Scaling::local)
            a.values[d] = n.counts[d] > 0 ? static_cast<double>(u.u[d]) / n.counts[d] : 0.0;
        else
            a.values[d] = static_cast<double>(u.u[d]) / capacity;
    }
    return a;
}

StepResult step(const ParkState& park, const ActionCounts& u) {
    if (park.t >= park.horizon)
        throw std::out_of_range("cannot step past slot " + std::to_string(park.horizon));
    const FlexCounts n = flex_counts(park);
    check_action(u, n);

    // Order by (flex, depart_remaining, ev_id) so each bin is contiguous and EDF-sorted.
    std::vector<std::size_t> order(park.connected.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = park.connected[a];
        const auto& y = park.connected[b];
        if (x.flex() != y.flex()) return x.flex() < y.flex();
        if (x.depart_remaining != y.depart_remaining)
            return x.depart_remaining < y.depart_remaining;
        return x.ev_id < y.ev_id;
    });

    std::vector<bool> charge(park.connected.size(), false);
    std::vector<int> taken(n.counts.size(), 0);
    for (std::size_t idx : order) {
        const auto d = static_cast<std::size_t>(park.connected[idx].flex());
        if (taken[d] < u.u[d]) {
            charge[idx] = true;
            ++taken[d];
        }
    }

    StepResult result;
    result.next.t = park.t + 1;
    result.next.horizon = park.horizon;
    result.next.capacity = park.capacity;
    result.next.episode_id = park.episode_id;
    result.next.pending = park.pending;
    for (std::size_t i = 0; i < park.connected.size(); ++i) {
        ConnectedEv ev = park.connected[i];
        --ev.depart_remaining;
        if (charge[i]) {
            --ev.charge_remaining;
            ++result.power;
        }
        if (ev.charge_remaining > 0 && ev.depart_remaining > 0)
            result.next.connected.push_back(ev);
    }
    if (park.pending && result.next.t < static_cast<int>(park.pending->size())) {
        const auto& arrivals = (*park.pending)[static_cast<std::size_t>(result.next.t)];
        result.next.connected.insert(result.next.connected.end(), arrivals.begin(),
                                     arrivals.end());
    }
    return result;
}

bool is_terminal(const ParkState& park) {
    return park.t == park.horizon && park.connected.empty();
}

}  // namespace evfqi
