#include "support.hpp"

#include "evfqi/oracle.hpp"
#include "evfqi/qlearn.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

using namespace evfqi;
using evfqi::test::make_episode;
using evfqi::test::WarningCapture;

namespace {

// Exact optimal cost-to-go of a single deterministic episode by exhaustive
// recursion over the full simulator state.
double optimal_value(const ParkState& park, std::map<std::string, double>& memo) {
    if (park.t >= park.horizon) return 0.0;
    std::ostringstream key;
    key << park.t;
    auto evs = park.connected;
    std::sort(evs.begin(), evs.end(), [](const auto& a, const auto& b) {
        return std::tie(a.depart_remaining, a.charge_remaining) <
               std::tie(b.depart_remaining, b.charge_remaining);
    });
    for (const auto& ev : evs) key << ';' << ev.depart_remaining << ',' << ev.charge_remaining;
    if (auto it = memo.find(key.str()); it != memo.end()) return it->second;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& u : enumerate_actions(flex_counts(park))) {
        const auto r = step(park, u);
        best = std::min(best, cost_quadratic(r.power) + optimal_value(r.next, memo));
    }
    memo[key.str()] = best;
    return best;
}

FqiConfig small_fqi(int iterations) {
    FqiConfig c;
    c.iterations = iterations;
    c.epochs = 60;
    c.batch_size = 32;
    c.hidden = {32, 16};
    c.target_scale = 1.0;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("encoded input widths") {
    CHECK(input_width(StateRepr::matrix, 12) == 157);
    CHECK(input_width(StateRepr::vector, 12) == 25);
    for (int s = 1; s <= 15; ++s) {
        CHECK(input_width(StateRepr::matrix, s) == s * s + s + 1);
        CHECK(input_width(StateRepr::vector, s) == 2 * s + 1);
    }
    const auto park = make_park(0, 12, 10, {});
    const ScaledAction zero{std::vector<double>(12, 0.0), Scaling::global};
    CHECK(encode_input(0, observe_matrix(park), zero).size() == 157);
    CHECK(encode_input(0, observe_vector(park), zero).size() == 25);
}

TEST_CASE("encoded input layout") {
    const auto zero_in = encode_input(0, observe_vector(make_park(0, 3, 4, {})),
                                      ScaledAction{{0.0, 0.0, 0.0}, Scaling::local});
    CHECK(std::all_of(zero_in.begin(), zero_in.end(), [](float v) { return v == 0.0F; }));

    const auto park = make_park(1, 3, 4, {{2, 1, 0}, {2, 2, 1}});
    const ScaledAction a{{1.0, 0.5, 0.0}, Scaling::local};
    const auto m = encode_input(park.t, observe_matrix(park), a);
    REQUIRE(m.size() == 13);
    CHECK(m[0] == doctest::Approx(1.0 / 3.0));
    // row depart=2: cells (2,1) and (2,2) at offsets 1 + 3 + 0 and 1 + 3 + 1
    CHECK(m[4] == doctest::Approx(0.25));
    CHECK(m[5] == doctest::Approx(0.25));
    CHECK(m[10] == 1.0F);
    CHECK(m[11] == 0.5F);
    const auto v = encode_input(park.t, observe_vector(park), a);
    CHECK(v == std::vector<float>{1.0F / 3.0F, 0.25F, 0.25F, 0.0F, 1.0F, 0.5F, 0.0F});
    const auto prefix = encode_state(park, StateRepr::vector);
    CHECK(std::equal(prefix.begin(), prefix.end(), v.begin()));
    CHECK_THROWS_AS(encode_input(0, observe_vector(park), ScaledAction{{0.0}, Scaling::local}),
                    std::invalid_argument);
}

TEST_CASE("one trajectory yields one tuple per slot") {
    const SlotConfig c;
    const auto eps = generate_synthetic(c, 1, GeneratorParams::desk_default(c), 4);
    ExperienceConfig ec;
    ec.trajectories_per_episode = 1;
    const auto set = generate_experience(eps, {}, {}, ec);
    REQUIRE(set.tuples.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(set.tuples[i].terminal == (i == 11));
        CHECK(set.tuples[i].cost >= 0.0);
        CHECK(set.states[static_cast<std::size_t>(set.tuples[i].state)].t == static_cast<int>(i));
    }
    const auto& last = set.states[static_cast<std::size_t>(set.tuples.back().next_state)];
    CHECK(last.terminal);
    CHECK(std::all_of(last.counts.begin(), last.counts.end(), [](int x) { return x == 0; }));
}

TEST_CASE("experience generation is deterministic and encoding independent") {
    const SlotConfig c;
    const auto eps = generate_synthetic(c, 6, GeneratorParams::desk_default(c), 5);
    ExperienceConfig ec;
    ec.trajectories_per_episode = 20;
    ec.seed = 17;
    ec.jobs = 3;
    auto dump = [](const ExperienceSet& s) {
        std::ostringstream out;
        write_experience_jsonl(out, s);
        return out.str();
    };
    const auto a = generate_experience(eps, {}, {}, ec);
    CHECK(dump(a) == dump(generate_experience(eps, {}, {}, ec)));

    ec.scaling = Scaling::global;
    const auto g = generate_experience(eps, {}, {}, ec);
    ec.repr = StateRepr::matrix;
    const auto m = generate_experience(eps, {}, {}, ec);
    REQUIRE(a.tuples.size() == g.tuples.size());
    REQUIRE(a.tuples.size() == m.tuples.size());
    for (std::size_t i = 0; i < a.tuples.size(); ++i) {
        CHECK(a.tuples[i].state == g.tuples[i].state);
        CHECK(a.tuples[i].cost == g.tuples[i].cost);
        CHECK(a.tuples[i].cost == m.tuples[i].cost);
        const auto& fa = a.states[static_cast<std::size_t>(a.tuples[i].state)].flex;
        CHECK(fa == m.states[static_cast<std::size_t>(m.tuples[i].state)].flex);
        // same raw action under both scalings
        for (std::size_t d = 0; d < fa.counts.size(); ++d)
            CHECK(std::lround(a.tuples[i].action.values[d] * fa.counts[d]) ==
                  std::lround(g.tuples[i].action.values[d] * g.capacity));
    }
}

TEST_CASE("experience sets round trip through json lines") {
    const SlotConfig c;
    const auto eps = generate_synthetic(c, 3, GeneratorParams::desk_default(c), 6);
    ExperienceConfig ec;
    ec.trajectories_per_episode = 5;
    ec.repr = StateRepr::matrix;
    const auto set = generate_experience(eps, {}, {}, ec);
    std::stringstream io;
    write_experience_jsonl(io, set);
    const auto back = read_experience_jsonl(io);
    std::ostringstream again;
    write_experience_jsonl(again, back);
    CHECK(again.str() == io.str());
    CHECK(back.tuples.size() == set.tuples.size());
    for (std::size_t i = 0; i < set.states.size(); ++i)
        CHECK(back.state_features(static_cast<int>(i)) == set.state_features(static_cast<int>(i)));
}

TEST_CASE("state features match the observation encoding") {
    const SlotConfig c;
    const auto eps = generate_synthetic(c, 4, GeneratorParams::desk_default(c), 8);
    for (auto repr : {StateRepr::matrix, StateRepr::vector}) {
        ExperienceConfig ec;
        ec.repr = repr;
        ec.trajectories_per_episode = 1;
        const auto set = generate_experience(eps, {}, {}, ec);
        // replay the first trajectory with the stored raw actions
        auto park = initial_state(eps[0]);
        for (int t = 0; t < 12; ++t) {
            const auto& tup = set.tuples[static_cast<std::size_t>(t)];
            CHECK(set.state_features(tup.state) == encode_state(park, repr));
            const auto n = flex_counts(park);
            ActionCounts u{std::vector<int>(n.counts.size())};
            for (std::size_t d = 0; d < n.counts.size(); ++d)
                u.u[d] = static_cast<int>(std::lround(tup.action.values[d] * n.counts[d]));
            park = step(park, u).next;
        }
    }
}

TEST_CASE("linear-cost experience needs history") {
    const auto e0 = make_episode(3, 4, {{0, 3, 2}}, 0);
    const auto e1 = make_episode(3, 4, {{0, 3, 1}}, 1);
    ProfileHistory h;
    h.emplace(0, solve_optimal(e0).profile);
    ExperienceConfig ec;
    ec.cost = CostKind::linear_avg;
    ec.trajectories_per_episode = 4;
    WarningCapture warnings;
    const auto set = generate_experience({e0, e1}, {0, 1}, h, ec);
    CHECK(set.tuples.size() == 12);  // episode 0 has nothing before it
    CHECK(warnings.messages.size() == 1);
    CHECK_THROWS_AS(generate_experience({e0}, {0, 1}, h, ec), std::invalid_argument);
}

TEST_CASE("terminal-only experience converges to its cost") {
    ExperienceSet set;
    set.repr = StateRepr::vector;
    set.horizon = 2;
    set.capacity = 1;
    set.states.push_back({1, {1, 0}, FlexCounts{{1, 0}}, false});
    set.states.push_back({2, {0, 0}, FlexCounts{{0, 0}}, true});
    set.tuples.push_back({0, ScaledAction{{1.0, 0.0}, Scaling::local}, 1, 5.0, true});
    auto cfg = small_fqi(4);
    cfg.epochs = 600;
    cfg.batch_size = 1;
    cfg.learning_rate = 1e-2;
    const auto iters = fqi(set, cfg);
    REQUIRE(iters.size() == 4);
    const std::vector<float> x{0.5F, 1.0F, 0.0F, 1.0F, 0.0F};
    for (const auto& it : iters) CHECK(it.net.forward(x) == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("two-step chain matches hand dynamic programming") {
    // a forced EV plus one EV that may charge now (P=2 then 0) or later (P=1 then 1)
    const auto e = make_episode(2, 2, {{0, 2, 1}, {0, 1, 1}});
    ExperienceConfig ec;
    ec.trajectories_per_episode = 40;
    const auto set = generate_experience({e}, {}, {}, ec);
    auto cfg = small_fqi(2);
    cfg.epochs = 300;
    cfg.learning_rate = 3e-3;
    const auto iters = fqi(set, cfg);
    const auto start = initial_state(e);
    const auto prefix = encode_state(start, StateRepr::vector);
    auto q = [&](const QNetwork& net, std::vector<double> local) {
        auto x = prefix;
        for (double v : local) x.push_back(static_cast<float>(v));
        return static_cast<double>(net.forward(x));
    };
    // iteration 1: immediate costs 4 (charge both) and 1 (defer)
    CHECK(q(iters[0].net, {1.0, 1.0}) == doctest::Approx(4.0).epsilon(0.05));
    CHECK(q(iters[0].net, {1.0, 0.0}) == doctest::Approx(1.0).epsilon(0.05));
    // iteration 2: 4 + 0 and 1 + 1
    CHECK(q(iters[1].net, {1.0, 1.0}) == doctest::Approx(4.0).epsilon(0.05));
    CHECK(q(iters[1].net, {1.0, 0.0}) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(greedy_policy(iters[1].net, start, StateRepr::vector, Scaling::local).u ==
          std::vector<int>{1, 0});
}

TEST_CASE("greedy policy on trivial parks and ties") {
    const QNetwork zero(25);
    CHECK(greedy_policy(zero, make_park(0, 12, 10, {}), StateRepr::vector, Scaling::local).u ==
          std::vector<int>(12, 0));
    auto forced = greedy_policy(zero, make_park(0, 12, 10, {{2, 2, 0}}), StateRepr::vector,
                                Scaling::global);
    CHECK(forced.u[0] == 1);
    CHECK(forced.total() == 1);
    // all actions score equally: the lexicographically smallest wins
    const auto park = make_park(0, 12, 10, {{4, 1, 0}, {5, 2, 1}});
    CHECK(greedy_policy(zero, park, StateRepr::vector, Scaling::local) ==
          enumerate_actions(flex_counts(park)).front());
}

TEST_CASE("fqi reports oversized successor action spaces") {
    const SlotConfig c;
    const auto eps = generate_synthetic(c, 2, GeneratorParams::desk_default(c), 9);
    ExperienceConfig ec;
    ec.trajectories_per_episode = 2;
    const auto set = generate_experience(eps, {}, {}, ec);
    auto cfg = small_fqi(2);
    cfg.action_cap = 1;
    CHECK_THROWS_AS(fqi(set, cfg), std::length_error);
    CHECK_THROWS_AS(fqi(ExperienceSet{}, small_fqi(1)), std::invalid_argument);
    FqiConfig bad;
    bad.iterations = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fqi is deterministic and calls back once per iteration") {
    const SlotConfig c;
    const auto eps = generate_synthetic(c, 3, GeneratorParams::desk_default(c), 10);
    ExperienceConfig ec;
    ec.trajectories_per_episode = 10;
    const auto set = generate_experience(eps, {}, {}, ec);
    auto cfg = small_fqi(3);
    cfg.epochs = 2;
    cfg.target_scale = 0.0;
    std::vector<int> seen;
    const auto a = fqi(set, cfg, [&](int k, const QNetwork&) { seen.push_back(k); });
    CHECK(seen == std::vector<int>{1, 2, 3});
    cfg.jobs = 4;
    const auto b = fqi(set, cfg);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].net.to_json() == b[k].net.to_json());
    CHECK(effective_target_scale(cfg, CostKind::quadratic, 10) == doctest::Approx(0.01));
    CHECK(effective_target_scale(cfg, CostKind::linear_avg, 10) == doctest::Approx(0.1));
}

TEST_CASE("greedy fqi policy matches exact dynamic programming on tiny episodes") {
    int agree = 0, total = 0;
    std::mt19937_64 rng(21);
    for (int k = 0; k < 6; ++k) {
        Episode e = evfqi::test::random_episode(rng, 5, 4, 8, k);
        while (e.sessions.size() < 5) e = evfqi::test::random_episode(rng, 5, 4, 8, k);
        ExperienceConfig ec;
        ec.repr = StateRepr::matrix;
        ec.trajectories_per_episode = 300;
        ec.seed = static_cast<std::uint64_t>(k);
        const auto set = generate_experience({e}, {}, {}, ec);
        auto cfg = small_fqi(5);
        cfg.epochs = 40;
        cfg.hidden = {64, 32};
        const auto net = fqi(set, cfg).back().net;

        // every state the experience set visited, rebuilt from a replay of
        // each reachable park
        std::map<std::string, double> memo;
        std::vector<ParkState> frontier{initial_state(e)};
        std::set<std::string> visited;
        while (!frontier.empty()) {
            const ParkState park = frontier.back();
            frontier.pop_back();
            if (park.t >= park.horizon) continue;
            std::ostringstream key;
            key << park.t;
            for (const auto& ev : park.connected)
                key << ';' << ev.ev_id << ':' << ev.depart_remaining << ',' << ev.charge_remaining;
            if (!visited.insert(key.str()).second) continue;
            const auto actions = enumerate_actions(flex_counts(park));
            for (const auto& u : actions) frontier.push_back(step(park, u).next);
            if (actions.size() == 1) continue;
            const auto chosen = greedy_policy(net, park, StateRepr::matrix, Scaling::local);
            const auto r = step(park, chosen);
            const double q = cost_quadratic(r.power) + optimal_value(r.next, memo);
            agree += q <= optimal_value(park, memo) + 1e-9;
            ++total;
        }
    }
    REQUIRE(total > 20);
    MESSAGE("agreement " << agree << "/" << total);
    CHECK(static_cast<double>(agree) >= 0.95 * total);
}
