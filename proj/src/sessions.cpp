#include "evfqi/sessions.hpp"

#include "evfqi/log.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace evfqi {

using nlohmann::json;

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(trim(current));
    return fields;
}

// Ceil with a small tolerance so that exact ratios computed in floating point
// (14 / (7 * 2)) do not round up to the next slot.
int tolerant_ceil(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }

}  // namespace

void SlotConfig::validate() const {
    if (!(slot_hours > 0.0)) throw std::invalid_argument("slot_hours must be positive");
    if (slots_per_episode < 1) throw std::invalid_argument("slots_per_episode must be >= 1");
    if (max_stations < 1) throw std::invalid_argument("max_stations must be >= 1");
    if (episode_start_hour < 0 || episode_start_hour > 23)
        throw std::invalid_argument("episode_start_hour must be in [0, 23]");
}

int Episode::total_demand() const {
    int total = 0;
    for (const auto& s : sessions) total += s.required_slots;
    return total;
}

std::vector<int> Episode::concurrency() const {
    std::vector<int> counts(static_cast<std::size_t>(config.slots_per_episode), 0);
    for (const auto& s : sessions)
        for (int t = std::max(0, s.arrival_slot);
             t < std::min(s.depart_slot, config.slots_per_episode); ++t)
            ++counts[static_cast<std::size_t>(t)];
    return counts;
}

void validate_episode(const Episode& episode) {
    const int horizon = episode.config.slots_per_episode;
    for (const auto& s : episode.sessions) {
        std::ostringstream where;
        where << "episode " << episode.episode_id << " station " << s.station_id;
        if (s.arrival_slot < 0 || s.arrival_slot >= horizon)
            throw std::invalid_argument(where.str() + ": arrival slot out of range");
        if (s.depart_slot <= s.arrival_slot || s.depart_slot > horizon)
            throw std::invalid_argument(where.str() + ": departure slot out of range");
        if (s.required_slots < 1 || s.required_slots > s.window())
            throw std::invalid_argument(where.str() + ": infeasible demand");
    }
    for (int c : episode.concurrency())
        if (c > episode.config.max_stations)
            throw std::invalid_argument("episode " + std::to_string(episode.episode_id) +
                                        ": concurrency exceeds max_stations");
}

std::int64_t parse_timestamp(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    const std::string t = trim(text);
    int consumed = 0;
    const int n = std::sscanf(t.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi,
                              &consumed);
    if (n < 6 || (sep != 'T' && sep != ' '))
        throw std::invalid_argument("malformed timestamp: " + text);
    std::string rest = t.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest[0] == ':') {
        int used = 0;
        if (std::sscanf(rest.c_str(), ":%2d%n", &s, &used) != 1)
            throw std::invalid_argument("malformed timestamp: " + text);
        rest = rest.substr(static_cast<std::size_t>(used));
    }
    if (!rest.empty() && rest != "Z") throw std::invalid_argument("malformed timestamp: " + text);
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0)
        throw std::invalid_argument("invalid timestamp: " + text);
    const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days_since_epoch) * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(std::int64_t seconds) {
    using namespace std::chrono;
    const std::int64_t day_index = floor_div(seconds, kSecondsPerDay);
    const std::int64_t rem = seconds - day_index * kSecondsPerDay;
    const year_month_day ymd{sys_days{days{day_index}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                  static_cast<int>(rem % 60));
    return buf;
}

CsvParseResult parse_transactions_csv(std::istream& in) {
    CsvParseResult result;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty CSV: header required");
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected{"station_id", "arrival", "departure", "energy_kwh"};
    if (header != expected)
        throw std::invalid_argument(
            "CSV header must be station_id,arrival,departure,energy_kwh");
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        try {
            if (fields.size() != 4 || fields[0].empty()) throw std::invalid_argument("fields");
            RawTransaction row;
            row.station_id = fields[0];
            row.arrival = parse_timestamp(fields[1]);
            row.departure = parse_timestamp(fields[2]);
            std::size_t used = 0;
            row.energy_kwh = std::stod(fields[3], &used);
            if (used != fields[3].size() || !std::isfinite(row.energy_kwh) || row.energy_kwh < 0.0)
                throw std::invalid_argument("energy");
            if (row.departure < row.arrival) throw std::invalid_argument("departure");
            result.rows.push_back(std::move(row));
        } catch (const std::exception&) {
            ++result.rejected;
        }
    }
    if (result.rejected > 0)
        warn("rejected " + std::to_string(result.rejected) + " malformed CSV rows");
    return result;
}

void write_transactions_csv(std::ostream& out, const std::vector<RawTransaction>& rows) {
    out << "station_id,arrival,departure,energy_kwh\n";
    for (const auto& r : rows) {
        std::ostringstream energy;
        energy.precision(17);
        energy << r.energy_kwh;
        out << r.station_id << ',' << format_timestamp(r.arrival) << ','
            << format_timestamp(r.departure) << ',' << energy.str() << '\n';
    }
}

DiscretizeResult discretize(const std::vector<RawTransaction>& transactions,
                            const SlotConfig& config, double charger_kw) {
    config.validate();
    if (!(charger_kw > 0.0)) throw std::invalid_argument("charger_kw must be positive");

    DiscretizeResult result;
    const std::int64_t start_offset = static_cast<std::int64_t>(config.episode_start_hour) * 3600;
    const double slot_seconds = config.slot_hours * 3600.0;
    const int horizon = config.slots_per_episode;

    struct Placed {
        std::int64_t day;
        std::size_t order;
        SessionRecord record;
    };
    std::vector<Placed> placed;
    std::int64_t first_day = 0, last_day = 0;
    bool any_day = false;

    for (std::size_t i = 0; i < transactions.size(); ++i) {
        const auto& tx = transactions[i];
        if (tx.departure < tx.arrival || !(tx.energy_kwh >= 0.0) || tx.station_id.empty()) {
            ++result.rejected;
            continue;
        }
        const std::int64_t day = floor_div(tx.arrival - start_offset, kSecondsPerDay);
        if (!any_day) first_day = last_day = day;
        first_day = std::min(first_day, day);
        last_day = std::max(last_day, day);
        any_day = true;

        const std::int64_t episode_start = day * kSecondsPerDay + start_offset;
        const double arrival_off = static_cast<double>(tx.arrival - episode_start);
        const double depart_off = static_cast<double>(tx.departure - episode_start);
        const int arrival_slot = static_cast<int>(std::floor(arrival_off / slot_seconds));
        if (arrival_slot >= horizon) {
            ++result.rejected;
            continue;
        }
        int depart_slot = tolerant_ceil(depart_off / slot_seconds);
        depart_slot = std::min(depart_slot, horizon);
        int required = tolerant_ceil(tx.energy_kwh / (charger_kw * config.slot_hours));
        if (depart_slot <= arrival_slot || required <= 0) {
            ++result.dropped;
            continue;
        }
        required = std::min(required, depart_slot - arrival_slot);

        SessionRecord rec;
        rec.station_id = tx.station_id;
        rec.arrival_slot = arrival_slot;
        rec.depart_slot = depart_slot;
        rec.required_slots = required;
        placed.push_back({day, i, std::move(rec)});
    }

    if (!any_day) return result;

    std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
        if (a.day != b.day) return a.day < b.day;
        if (a.record.arrival_slot != b.record.arrival_slot)
            return a.record.arrival_slot < b.record.arrival_slot;
        return a.order < b.order;
    });

    const auto n_days = static_cast<std::size_t>(last_day - first_day + 1);
    result.episodes.resize(n_days);
    for (std::size_t d = 0; d < n_days; ++d) {
        auto& ep = result.episodes[d];
        ep.episode_id = static_cast<int>(d);
        ep.config = config;
        using namespace std::chrono;
        const weekday wd{sys_days{days{first_day + static_cast<std::int64_t>(d)}}};
        ep.is_weekday = wd != Saturday && wd != Sunday;
    }

    std::vector<std::vector<int>> load(n_days, std::vector<int>(static_cast<std::size_t>(horizon)));
    for (auto& p : placed) {
        const auto d = static_cast<std::size_t>(p.day - first_day);
        auto& counts = load[d];
        bool fits = true;
        for (int t = p.record.arrival_slot; t < p.record.depart_slot; ++t)
            fits = fits && counts[static_cast<std::size_t>(t)] < config.max_stations;
        if (!fits) {
            ++result.capacity_rejected;
            continue;
        }
        for (int t = p.record.arrival_slot; t < p.record.depart_slot; ++t)
            ++counts[static_cast<std::size_t>(t)];
        auto& ep = result.episodes[d];
        p.record.episode_id = ep.episode_id;
        p.record.is_weekday = ep.is_weekday;
        ep.sessions.push_back(std::move(p.record));
    }

    if (result.rejected > 0)
        warn("discretize rejected " + std::to_string(result.rejected) + " transactions");
    if (result.capacity_rejected > 0)
        warn("discretize rejected " + std::to_string(result.capacity_rejected) +
             " transactions exceeding station capacity");
    return result;
}

std::vector<std::string> select_busiest_stations(const std::vector<RawTransaction>& records,
                                                 int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) ++counts[r.station_id];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() < static_cast<std::size_t>(k))
        warn("only " + std::to_string(ranked.size()) + " stations available, requested " +
             std::to_string(k));
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i)
        out.push_back(ranked[i].first);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<RawTransaction> filter_stations(const std::vector<RawTransaction>& records,
                                            const std::vector<std::string>& stations) {
    std::vector<RawTransaction> out;
    for (const auto& r : records)
        if (std::find(stations.begin(), stations.end(), r.station_id) != stations.end())
            out.push_back(r);
    return out;
}

GeneratorParams GeneratorParams::desk_default(const SlotConfig& config) {
    GeneratorParams p;
    // Morning commuter peak and a smaller evening peak, 2 h slots from 07:00.
    const std::vector<double> rate12{3.0, 1.6, 0.6, 0.5, 0.8, 1.8, 1.2, 0.3,
                                     0.05, 0.02, 0.02, 0.02};
    const auto n = static_cast<std::size_t>(config.slots_per_episode);
    p.arrival_rate.assign(n, 0.1);
    for (std::size_t i = 0; i < n && i < rate12.size(); ++i) p.arrival_rate[i] = rate12[i];
    p.duration_weights = {0.04, 0.08, 0.14, 0.18, 0.18, 0.14, 0.1, 0.06, 0.04, 0.02, 0.01, 0.01};
    p.duration_weights.resize(n, 0.0);
    p.demand_weights = {0.3, 0.3, 0.2, 0.12, 0.08};
    return p;
}

void GeneratorParams::validate(const SlotConfig& config) const {
    if (arrival_rate.size() != static_cast<std::size_t>(config.slots_per_episode))
        throw std::invalid_argument("arrival_rate must have one entry per slot");
    auto check_weights = [](const std::vector<double>& w, const char* name) {
        double total = 0.0;
        for (double x : w) {
            if (!(x >= 0.0) || !std::isfinite(x))
                throw std::invalid_argument(std::string(name) + " must be non-negative");
            total += x;
        }
        if (!(total > 0.0)) throw std::invalid_argument(std::string(name) + " must not sum to 0");
    };
    for (double r : arrival_rate)
        if (!(r >= 0.0) || !std::isfinite(r))
            throw std::invalid_argument("arrival_rate must be non-negative");
    check_weights(duration_weights, "duration_weights");
    check_weights(demand_weights, "demand_weights");
    if (!(weekend_rate_scale >= 0.0)) throw std::invalid_argument("weekend_rate_scale < 0");
    if (first_weekday < 0 || first_weekday > 6)
        throw std::invalid_argument("first_weekday must be in [0, 6]");
}

std::vector<Episode> generate_synthetic(const SlotConfig& config, int n_episodes,
                                        const GeneratorParams& params, std::uint64_t seed) {
    config.validate();
    params.validate(config);
    if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");

    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> duration(params.duration_weights.begin(),
                                             params.duration_weights.end());
    std::discrete_distribution<int> demand(params.demand_weights.begin(),
                                           params.demand_weights.end());
    const int horizon = config.slots_per_episode;
    std::vector<Episode> episodes;
    episodes.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) {
        Episode ep;
        ep.episode_id = e;
        ep.config = config;
        ep.is_weekday = (e + params.first_weekday) % 7 < 5;
        const double scale = ep.is_weekday ? 1.0 : params.weekend_rate_scale;

        // station index -> slot at which it becomes free
        std::vector<int> free_at(static_cast<std::size_t>(config.max_stations), 0);
        for (int t = 0; t < horizon; ++t) {
            const double mean = params.arrival_rate[static_cast<std::size_t>(t)] * scale;
            int arrivals = 0;
            if (mean > 0.0) arrivals = std::poisson_distribution<int>(mean)(rng);
            for (int a = 0; a < arrivals; ++a) {
                const int stay = duration(rng) + 1;
                const int need = demand(rng) + 1;
                auto station = std::find_if(free_at.begin(), free_at.end(),
                                            [t](int f) { return f <= t; });
                if (station == free_at.end()) continue;  // park full: arrival rejected
                SessionRecord rec;
                rec.arrival_slot = t;
                rec.depart_slot = std::min(t + stay, horizon);
                rec.required_slots = std::min(need, rec.window());
                rec.episode_id = e;
                rec.is_weekday = ep.is_weekday;
                const auto idx = static_cast<int>(station - free_at.begin());
                char name[16];
                std::snprintf(name, sizeof name, "S%02d", idx + 1);
                rec.station_id = name;
                *station = rec.depart_slot;
                ep.sessions.push_back(std::move(rec));
            }
        }
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

std::vector<Episode> weekday_filter(const std::vector<Episode>& episodes) {
    std::vector<Episode> out;
    std::copy_if(episodes.begin(), episodes.end(), std::back_inserter(out),
                 [](const Episode& e) { return e.is_weekday; });
    return out;
}

std::string episode_to_json(const Episode& episode) {
    json sessions = json::array();
    for (const auto& s : episode.sessions)
        sessions.push_back({{"station", s.station_id},
                            {"arrival_slot", s.arrival_slot},
                            {"depart_slot", s.depart_slot},
                            {"required_slots", s.required_slots}});
    json j = {{"episode_id", episode.episode_id},
              {"is_weekday", episode.is_weekday},
              {"sessions", std::move(sessions)}};
    return j.dump();
}

Episode episode_from_json(const std::string& line, const SlotConfig& config) {
    const json j = json::parse(line);
    Episode ep;
    ep.episode_id = j.at("episode_id").get<int>();
    ep.is_weekday = j.at("is_weekday").get<bool>();
    ep.config = config;
    for (const auto& s : j.at("sessions")) {
        SessionRecord rec;
        rec.station_id = s.at("station").get<std::string>();
        rec.arrival_slot = s.at("arrival_slot").get<int>();
        rec.depart_slot = s.at("depart_slot").get<int>();
        rec.required_slots = s.at("required_slots").get<int>();
        rec.episode_id = ep.episode_id;
        rec.is_weekday = ep.is_weekday;
        ep.sessions.push_back(std::move(rec));
    }
    validate_episode(ep);
    return ep;
}

void write_episodes_jsonl(std::ostream& out, const std::vector<Episode>& episodes) {
    for (const auto& e : episodes) out << episode_to_json(e) << '\n';
}

std::vector<Episode> read_episodes_jsonl(std::istream& in, const SlotConfig& config) {
    std::vector<Episode> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(episode_from_json(line, config));
        } catch (const std::exception& ex) {
            throw std::invalid_argument("episode line " + std::to_string(line_no) + ": " +
                                        ex.what());
        }
    }
    return out;
}

}  // namespace evfqi
