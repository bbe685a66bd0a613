#pragma once

#include "evfqi/costs.hpp"
#include "evfqi/sessions.hpp"

#include <vector>

namespace evfqi {

/// Charging slots of each session, in episode session order.
struct Schedule {
    std::vector<std::vector<int>> slots;
};

struct ScheduleResult {
    Schedule schedule;
    PowerProfile profile;
    double load = 0.0;  // sum of squared per-slot power
};

/// Throws std::invalid_argument unless every session charges exactly
/// required_slots distinct slots inside its connection window.
void check_schedule(const Episode& episode, const Schedule& schedule);

ScheduleResult evaluate_schedule(const Episode& episode, Schedule schedule);

}  // namespace evfqi
