#pragma once

#include "evfqi/schedule.hpp"

#include <string>

namespace evfqi {

/// A-posteriori load-flattening optimum: minimizes the sum of squared slot
/// loads over integral schedules. Solved as a min-cost flow on the
/// session -> slot graph where the k-th unit on a slot costs 2k - 1, by
/// successive shortest augmenting paths. Equal-cost alternatives resolve to
/// the earliest slot.
ScheduleResult solve_optimal(const Episode& episode);

/// Exhaustive search over every feasible schedule. Throws std::length_error
/// when the number of schedules exceeds `limit`.
long long brute_force_optimal(const Episode& episode, long long limit = 1'000'000);

/// True if no single unit can move from one slot to another feasible slot of
/// the same session and lower the load.
bool is_exchange_optimal(const Episode& episode, const Schedule& schedule);

std::string schedule_to_json(const Episode& episode, const Schedule& schedule);

}  // namespace evfqi
