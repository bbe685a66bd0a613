#include "support.hpp"

#include "evfqi/costs.hpp"
#include "evfqi/environment.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace evfqi;

namespace {

ParkState fig1_park(int t = 0, int horizon = 3) {
    return make_park(t, horizon, 4, {{3, 2, 0}, {2, 1, 1}, {2, 2, 2}});
}

ParkState random_park(std::mt19937_64& rng, int horizon, int capacity) {
    const int t = std::uniform_int_distribution<int>(0, horizon - 1)(rng);
    const int n = std::uniform_int_distribution<int>(0, capacity)(rng);
    std::vector<ConnectedEv> evs;
    for (int i = 0; i < n; ++i) {
        const int depart = std::uniform_int_distribution<int>(1, horizon - t)(rng);
        const int charge = std::uniform_int_distribution<int>(1, depart)(rng);
        evs.push_back({depart, charge, i});
    }
    return make_park(t, horizon, capacity, evs);
}

ActionCounts random_action(std::mt19937_64& rng, const FlexCounts& n) {
    ActionCounts u{std::vector<int>(n.counts.size(), 0)};
    u.u[0] = n.counts[0];
    for (std::size_t d = 1; d < n.counts.size(); ++d)
        u.u[d] = std::uniform_int_distribution<int>(0, n.counts[d])(rng);
    return u;
}

}  // namespace

TEST_CASE("matrix observation of the three-car example") {
    const auto obs = observe_matrix(fig1_park());
    REQUIRE(obs.size == 3);
    CHECK(obs.at(3, 2) == doctest::Approx(0.25));
    CHECK(obs.at(2, 1) == doctest::Approx(0.25));
    CHECK(obs.at(2, 2) == doctest::Approx(0.25));
    double sum = 0.0;
    for (double v : obs.grid) sum += v;
    CHECK(sum == doctest::Approx(0.75));
}

TEST_CASE("matrix observation edge cases") {
    const auto empty = observe_matrix(make_park(0, 12, 10, {}));
    CHECK(std::all_of(empty.grid.begin(), empty.grid.end(), [](double v) { return v == 0.0; }));
    const auto one = observe_matrix(make_park(0, 12, 10, {{1, 1, 0}}));
    CHECK(one.at(1, 1) == doctest::Approx(0.1));
    CHECK(one.grid.size() == 144);
}

TEST_CASE("vector observation of the three-car example") {
    const auto obs = observe_vector(fig1_park());
    REQUIRE(obs.bins.size() == 3);
    CHECK(obs.bins[0] == doctest::Approx(0.25));
    CHECK(obs.bins[1] == doctest::Approx(0.5));
    CHECK(obs.bins[2] == 0.0);
    const auto empty = observe_vector(make_park(0, 12, 10, {}));
    CHECK(std::all_of(empty.bins.begin(), empty.bins.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("observations agree and satisfy their invariants on random parks") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto park = random_park(rng, 12, 10);
        const auto m = observe_matrix(park);
        const auto v = observe_vector(park);
        double total = 0.0;
        for (int i = 1; i <= m.size; ++i)
            for (int j = 1; j <= m.size; ++j) {
                const double cell = m.at(i, j);
                CHECK(cell >= 0.0);
                CHECK(cell <= 1.0);
                const double scaled = cell * park.capacity;
                CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
                if (j > i) CHECK(cell == 0.0);
                total += cell;
            }
        CHECK(total * park.capacity == doctest::Approx(park.size()));
        for (int d = 0; d < m.size; ++d) {
            double diag = 0.0;
            for (int j = 1; j + d <= m.size; ++j) diag += m.at(j + d, j);
            CHECK(v.bins[static_cast<std::size_t>(d)] == doctest::Approx(diag));
        }
        const auto n = flex_counts(park);
        CHECK(n.total() == park.size());
    }
}

TEST_CASE("enumerate actions for the three-car example") {
    const auto n = flex_counts(fig1_park());
    CHECK(n.counts == std::vector<int>{1, 2, 0});
    const auto actions = enumerate_actions(n);
    REQUIRE(actions.size() == 3);
    CHECK(actions[0].u == std::vector<int>{1, 0, 0});
    CHECK(actions[1].u == std::vector<int>{1, 1, 0});
    CHECK(actions[2].u == std::vector<int>{1, 2, 0});
}

TEST_CASE("enumerate actions small cases") {
    const auto zero = enumerate_actions(FlexCounts{{0, 0, 0}});
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].u == std::vector<int>{0, 0, 0});

    const FlexCounts n{{2, 1, 3}};
    const auto actions = enumerate_actions(n);
    CHECK(actions.size() == 8);
    std::set<std::vector<int>> brute;
    for (int a = 0; a <= 1; ++a)
        for (int b = 0; b <= 3; ++b) brute.insert({2, a, b});
    std::set<std::vector<int>> got;
    for (const auto& u : actions) got.insert(u.u);
    CHECK(got == brute);

    CHECK_THROWS_AS(enumerate_actions(FlexCounts{{0, 9, 9, 9}}, 999), std::length_error);
}

TEST_CASE("action-space size law and lexicographic order") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        FlexCounts n{std::vector<int>(12, 0)};
        int left = 10;
        while (left > 0 && std::uniform_int_distribution<int>(0, 3)(rng) > 0) {
            ++n.counts[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 11)(rng))];
            --left;
        }
        long long expected = 1;
        for (std::size_t d = 1; d < n.counts.size(); ++d) expected *= n.counts[d] + 1;
        const auto actions = enumerate_actions(n);
        CHECK(static_cast<long long>(actions.size()) == expected);
        CHECK(action_space_size(n) == expected);
        CHECK(std::is_sorted(actions.begin(), actions.end()));
        CHECK(std::adjacent_find(actions.begin(), actions.end()) == actions.end());
        for (const auto& u : actions) CHECK_NOTHROW(check_action(u, n));
    }
}

TEST_CASE("action checks") {
    const FlexCounts n{{1, 2, 0}};
    CHECK_THROWS_AS(check_action(ActionCounts{{0, 1, 0}}, n), std::invalid_argument);
    CHECK_THROWS_AS(check_action(ActionCounts{{1, 3, 0}}, n), std::invalid_argument);
    CHECK_THROWS_AS(check_action(ActionCounts{{1, 1}}, n), std::invalid_argument);
    CHECK_THROWS_AS(check_action(ActionCounts{{1, -1, 0}}, n), std::invalid_argument);
}

TEST_CASE("action scaling") {
    const FlexCounts n{{1, 2, 0}};
    const ActionCounts u{{1, 1, 0}};
    const auto local = scale(u, n, Scaling::local, 4);
    CHECK(local.values == std::vector<double>{1.0, 0.5, 0.0});
    const auto global = scale(u, n, Scaling::global, 4);
    CHECK(global.values == std::vector<double>{0.25, 0.25, 0.0});
    for (auto mode : {Scaling::local, Scaling::global})
        CHECK(scale(ActionCounts{{0, 0, 0}}, FlexCounts{{0, 0, 0}}, mode, 4).values ==
              std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("step on the three-car example") {
    const auto park = fig1_park(1, 4);
    const auto r = step(park, ActionCounts{{1, 1, 0, 0}});
    CHECK(r.power == 2);
    CHECK(r.next.t == 2);
    REQUIRE(r.next.connected.size() == 2);
    std::vector<ConnectedEv> remaining = r.next.connected;
    std::sort(remaining.begin(), remaining.end(),
              [](const auto& a, const auto& b) { return a.ev_id < b.ev_id; });
    CHECK(remaining[0] == ConnectedEv{2, 2, 0});
    CHECK(remaining[1] == ConnectedEv{1, 1, 2});
}

TEST_CASE("step edge cases") {
    const auto empty = make_park(0, 3, 4, {});
    const auto r = step(empty, ActionCounts{{0, 0, 0}});
    CHECK(r.power == 0);
    CHECK(r.next.connected.empty());
    CHECK(r.next.t == 1);
    const auto end = make_park(3, 3, 4, {});
    CHECK(is_terminal(end));
    CHECK_THROWS_AS(step(end, ActionCounts{{0, 0, 0}}), std::out_of_range);
    CHECK_THROWS_AS(step(fig1_park(), ActionCounts{{0, 0, 0}}), std::invalid_argument);
    CHECK_FALSE(is_terminal(make_park(2, 3, 4, {})));
}

TEST_CASE("step is pure and conserves power") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const auto park = random_park(rng, 12, 10);
        const auto n = flex_counts(park);
        const auto u = random_action(rng, n);
        const auto a = step(park, u);
        const auto b = step(park, u);
        CHECK(a.power == b.power);
        CHECK(a.next.connected == b.next.connected);
        CHECK(a.power == u.total());
        CHECK(power(n, scale(u, n, Scaling::local, park.capacity)) == doctest::Approx(a.power));
    }
}

TEST_CASE("initial state admits slot-zero arrivals only") {
    const auto e = evfqi::test::make_episode(4, 4, {{0, 3, 2}, {1, 2, 1}, {0, 1, 1}});
    const auto park = initial_state(e);
    CHECK(park.t == 0);
    CHECK(park.size() == 2);
    CHECK(park.horizon == 4);
    CHECK(park.capacity == 4);
    const auto next = step(park, ActionCounts{{1, 0, 0, 0}});
    // the (0,1,1) EV finishes, the slot-1 arrival joins
    CHECK(next.next.size() == 2);
}

TEST_CASE("random feasible control never violates demand and terminates on time") {
    std::mt19937_64 rng(4);
    const SlotConfig c;
    const auto episodes = generate_synthetic(c, 1000, GeneratorParams::desk_default(c), 99);
    for (const auto& e : episodes) {
        auto park = initial_state(e);
        int delivered = 0;
        while (park.t < park.horizon) {
            CHECK(park.size() <= park.capacity);
            for (const auto& ev : park.connected) {
                CHECK(ev.flex() >= 0);
                CHECK(ev.charge_remaining >= 1);
            }
            auto r = step(park, random_action(rng, flex_counts(park)));
            delivered += r.power;
            park = std::move(r.next);
        }
        CHECK(is_terminal(park));
        CHECK(delivered == e.total_demand());
    }
}

TEST_CASE("representation names round trip") {
    for (auto r : {StateRepr::matrix, StateRepr::vector})
        CHECK(parse_state_repr(to_string(r)) == r);
    for (auto s : {Scaling::local, Scaling::global}) CHECK(parse_scaling(to_string(s)) == s);
    CHECK_THROWS_AS(parse_state_repr("tensor"), std::invalid_argument);
    CHECK_THROWS_AS(parse_scaling("none"), std::invalid_argument);
}
