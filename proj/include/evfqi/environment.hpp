#pragma once

#include "evfqi/sessions.hpp"

#include <memory>
#include <string>
#include <vector>

namespace evfqi {

enum class StateRepr { matrix, vector };
enum class Scaling { local, global };

std::string to_string(StateRepr repr);
std::string to_string(Scaling scaling);
StateRepr parse_state_repr(const std::string& text);
Scaling parse_scaling(const std::string& text);

struct ConnectedEv {
    int depart_remaining = 1;
    int charge_remaining = 1;
    int ev_id = 0;

    int flex() const { return depart_remaining - charge_remaining; }
    bool operator==(const ConnectedEv&) const = default;
};

/// Arrivals of one episode, bucketed by arrival slot.
using ArrivalSchedule = std::vector<std::vector<ConnectedEv>>;

/// Full simulator state at the start of slot `t`. Immutable by convention:
/// step() produces a fresh value and shares the arrival schedule.
struct ParkState {
    int t = 0;
    int horizon = 12;       // S_max
    int capacity = 10;      // N_max
    int episode_id = 0;
    std::vector<ConnectedEv> connected;
    std::shared_ptr<const ArrivalSchedule> pending;

    int size() const { return static_cast<int>(connected.size()); }
};

/// State at slot 0 with slot-0 arrivals already admitted.
ParkState initial_state(const Episode& episode);

/// A park with the given EVs and no future arrivals. ev_id follows list order.
ParkState make_park(int t, int horizon, int capacity, std::vector<ConnectedEv> evs);

struct MatrixObservation {
    int t = 0;
    int size = 0;
    /// Row-major size x size; row i-1 holds depart_remaining = i, column j-1 charge_remaining = j.
    std::vector<double> grid;

    double at(int depart, int charge) const {
        return grid[static_cast<std::size_t>((depart - 1) * size + (charge - 1))];
    }
};

struct VectorObservation {
    int t = 0;
    std::vector<double> bins;  // index = flexibility
};

struct FlexCounts {
    std::vector<int> counts;

    int total() const;
    bool operator==(const FlexCounts&) const = default;
};

struct ActionCounts {
    std::vector<int> u;

    int total() const;
    bool operator==(const ActionCounts&) const = default;
    auto operator<=>(const ActionCounts&) const = default;
};

struct ScaledAction {
    std::vector<double> values;
    Scaling scaling = Scaling::local;
};

MatrixObservation observe_matrix(const ParkState& park);
VectorObservation observe_vector(const ParkState& park);
FlexCounts flex_counts(const ParkState& park);

/// Size of the action space: product over d >= 1 of (N_d + 1).
long long action_space_size(const FlexCounts& n);

/// All feasible actions in lexicographic order (u[0] = N_0 fixed).
/// Throws std::length_error if the space exceeds `cap`.
std::vector<ActionCounts> enumerate_actions(const FlexCounts& n, long long cap = 50'000);

/// Throws std::invalid_argument describing the first violated bound.
void check_action(const ActionCounts& u, const FlexCounts& n);

ScaledAction scale(const ActionCounts& u, const FlexCounts& n, Scaling mode, int capacity);

struct StepResult {
    ParkState next;
    int power = 0;
};

/// Charges u[d] EVs of each flexibility bin d (earliest departure first, then
/// ev_id), advances one slot, drops finished or departed EVs, admits arrivals.
StepResult step(const ParkState& park, const ActionCounts& u);

bool is_terminal(const ParkState& park);

}  // namespace evfqi
