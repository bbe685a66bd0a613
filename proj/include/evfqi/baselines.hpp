#pragma once

#include "evfqi/schedule.hpp"

namespace evfqi {

/// Business as usual: every EV charges continuously from arrival.
ScheduleResult bau_schedule(const Episode& episode);

/// Uniform spread: with window d and demand c, window slot j charges iff
/// floor((j+1)c/d) - floor(jc/d) == 1.
ScheduleResult heuristic_schedule(const Episode& episode);

/// Window offsets (0-based) used by heuristic_schedule.
std::vector<int> spread_pattern(int window, int demand);

}  // namespace evfqi
