#include "evfqi/schedule.hpp"

#include <algorithm>
#include <stdexcept>

namespace evfqi {

void check_schedule(const Episode& episode, const Schedule& schedule) {
    if (schedule.slots.size() != episode.sessions.size())
        throw std::invalid_argument("schedule does not cover every session");
    for (std::size_t i = 0; i < episode.sessions.size(); ++i) {
        const auto& s = episode.sessions[i];
        auto slots = schedule.slots[i];
        std::sort(slots.begin(), slots.end());
        if (std::adjacent_find(slots.begin(), slots.end()) != slots.end())
            throw std::invalid_argument("session " + std::to_string(i) + " repeats a slot");
        if (static_cast<int>(slots.size()) != s.required_slots)
            throw std::invalid_argument("session " + std::to_string(i) + " charges " +
                                        std::to_string(slots.size()) + " of " +
                                        std::to_string(s.required_slots) + " slots");
        for (int t : slots)
            if (t < s.arrival_slot || t >= s.depart_slot)
                throw std::invalid_argument("session " + std::to_string(i) +
                                            " charges outside its window");
    }
}

ScheduleResult evaluate_schedule(const Episode& episode, Schedule schedule) {
    check_schedule(episode, schedule);
    ScheduleResult r;
    r.profile.episode_id = episode.episode_id;
    r.profile.power.assign(static_cast<std::size_t>(episode.config.slots_per_episode), 0.0);
    for (const auto& slots : schedule.slots)
        for (int t : slots) r.profile.power[static_cast<std::size_t>(t)] += 1.0;
    for (double p : r.profile.power) r.load += p * p;
    r.schedule = std::move(schedule);
    return r;
}

}  // namespace evfqi
