#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evfqi {

/// Time discretization of an episodic day.
struct SlotConfig {
    double slot_hours = 2.0;
    int slots_per_episode = 12;  // S_max
    int episode_start_hour = 7;
    int max_stations = 10;       // N_max

    double horizon_hours() const { return slot_hours * slots_per_episode; }

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct SessionRecord {
    std::string station_id;
    int arrival_slot = 0;
    int depart_slot = 1;     // exclusive
    int required_slots = 1;
    int episode_id = 0;
    bool is_weekday = true;

    int window() const { return depart_slot - arrival_slot; }
    bool operator==(const SessionRecord&) const = default;
};

struct Episode {
    int episode_id = 0;
    bool is_weekday = true;
    std::vector<SessionRecord> sessions;
    SlotConfig config;

    int total_demand() const;
    /// Number of sessions connected during each slot.
    std::vector<int> concurrency() const;

    bool operator==(const Episode& other) const {
        return episode_id == other.episode_id && is_weekday == other.is_weekday &&
               sessions == other.sessions;
    }
};

/// Throws std::invalid_argument if a session or the concurrency limit is violated.
void validate_episode(const Episode& episode);

/// One raw charging transaction. Timestamps are seconds since the Unix epoch,
/// interpreted as naive local time.
struct RawTransaction {
    std::string station_id;
    std::int64_t arrival = 0;
    std::int64_t departure = 0;
    double energy_kwh = 0.0;
};

/// Parses "YYYY-MM-DDTHH:MM[:SS]" (a space separator and a trailing "Z" are accepted).
/// Throws std::invalid_argument on malformed input.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t seconds);

struct CsvParseResult {
    std::vector<RawTransaction> rows;
    std::size_t rejected = 0;
};

/// Reads `station_id,arrival,departure,energy_kwh` with a mandatory header.
/// Malformed rows and rows departing before they arrive are counted, not thrown.
CsvParseResult parse_transactions_csv(std::istream& in);
void write_transactions_csv(std::ostream& out, const std::vector<RawTransaction>& rows);

struct DiscretizeResult {
    std::vector<Episode> episodes;
    std::size_t rejected = 0;           // departure before arrival / invalid values
    std::size_t dropped = 0;            // zero demand after rounding
    std::size_t capacity_rejected = 0;  // would exceed max_stations
};

/// Maps transactions onto episodic days starting at config.episode_start_hour.
/// Every day between the first and last transaction yields an episode, empty or not.
DiscretizeResult discretize(const std::vector<RawTransaction>& transactions,
                            const SlotConfig& config, double charger_kw);

/// The k station ids with the most transactions; ties go to the smaller id.
std::vector<std::string> select_busiest_stations(const std::vector<RawTransaction>& records,
                                                 int k);

std::vector<RawTransaction> filter_stations(const std::vector<RawTransaction>& records,
                                            const std::vector<std::string>& stations);

struct GeneratorParams {
    /// Expected arrivals per slot (Poisson mean), one entry per slot.
    std::vector<double> arrival_rate;
    /// Relative weight of a connection lasting k+1 slots.
    std::vector<double> duration_weights;
    /// Relative weight of a demand of k+1 charging slots.
    std::vector<double> demand_weights;
    double weekend_rate_scale = 0.5;
    /// Day of week of episode 0 (0 = Monday).
    int first_weekday = 0;

    static GeneratorParams desk_default(const SlotConfig& config);
    void validate(const SlotConfig& config) const;
};

std::vector<Episode> generate_synthetic(const SlotConfig& config, int n_episodes,
                                        const GeneratorParams& params, std::uint64_t seed);

/// Weekday episodes in their original order.
std::vector<Episode> weekday_filter(const std::vector<Episode>& episodes);

std::string episode_to_json(const Episode& episode);
Episode episode_from_json(const std::string& line, const SlotConfig& config);
void write_episodes_jsonl(std::ostream& out, const std::vector<Episode>& episodes);
std::vector<Episode> read_episodes_jsonl(std::istream& in, const SlotConfig& config);

}  // namespace evfqi
