#pragma once

#include "evfqi/log.hpp"
#include "evfqi/sessions.hpp"

#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace evfqi::test {

struct Spec {
    int arrival;
    int depart;
    int required;
};

inline Episode make_episode(int slots, int capacity, const std::vector<Spec>& specs, int id = 0) {
    Episode e;
    e.episode_id = id;
    e.config.slots_per_episode = slots;
    e.config.max_stations = capacity;
    int k = 0;
    for (const auto& s : specs) {
        SessionRecord r;
        r.station_id = "S" + std::to_string(++k);
        r.arrival_slot = s.arrival;
        r.depart_slot = s.depart;
        r.required_slots = s.required;
        r.episode_id = id;
        e.sessions.push_back(r);
    }
    return e;
}

/// Three EVs over three slots: (window 3, demand 2), (2, 1), (2, 2).
inline Episode fig1_episode() {
    return make_episode(3, 4, {{0, 3, 2}, {0, 2, 1}, {0, 2, 2}});
}

/// Random feasible episode; sessions that would break capacity are skipped.
inline Episode random_episode(std::mt19937_64& rng, int slots, int capacity, int max_sessions,
                              int id = 0) {
    Episode e = make_episode(slots, capacity, {}, id);
    std::uniform_int_distribution<int> count(0, max_sessions);
    const int n = count(rng);
    std::vector<int> load(static_cast<std::size_t>(slots), 0);
    for (int k = 0; k < n; ++k) {
        const int a = std::uniform_int_distribution<int>(0, slots - 1)(rng);
        const int d = std::uniform_int_distribution<int>(a + 1, slots)(rng);
        const int c = std::uniform_int_distribution<int>(1, d - a)(rng);
        bool fits = true;
        for (int t = a; t < d; ++t) fits = fits && load[static_cast<std::size_t>(t)] < capacity;
        if (!fits) continue;
        for (int t = a; t < d; ++t) ++load[static_cast<std::size_t>(t)];
        SessionRecord r;
        r.station_id = "R" + std::to_string(k);
        r.arrival_slot = a;
        r.depart_slot = d;
        r.required_slots = c;
        r.episode_id = id;
        e.sessions.push_back(r);
    }
    return e;
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture()
        : previous_(set_warning_sink([this](const std::string& m) { messages.push_back(m); })) {}
    ~WarningCapture() { set_warning_sink(previous_); }
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    std::vector<std::string> messages;

private:
    WarningSink previous_;
};

}  // namespace evfqi::test
