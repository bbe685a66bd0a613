#include "evfqi/baselines.hpp"

namespace evfqi {

ScheduleResult bau_schedule(const Episode& episode) {
    Schedule schedule;
    for (const auto& s : episode.sessions) {
        std::vector<int> slots;
        for (int k = 0; k < s.required_slots; ++k) slots.push_back(s.arrival_slot + k);
        schedule.slots.push_back(std::move(slots));
    }
    return evaluate_schedule(episode, std::move(schedule));
}

std::vector<int> spread_pattern(int window, int demand) {
    std::vector<int> offsets;
    for (int j = 0; j < window; ++j)
        if ((j + 1) * demand / window - j * demand / window == 1) offsets.push_back(j);
    return offsets;
}

ScheduleResult heuristic_schedule(const Episode& episode) {
    Schedule schedule;
    for (const auto& s : episode.sessions) {
        auto slots = spread_pattern(s.window(), s.required_slots);
        for (int& t : slots) t += s.arrival_slot;
        schedule.slots.push_back(std::move(slots));
    }
    return evaluate_schedule(episode, std::move(schedule));
}

}  // namespace evfqi
