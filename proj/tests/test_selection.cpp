#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fedfair/rng.hpp"
#include "fedfair/selection.hpp"

using namespace fedfair;

namespace {

// A tiny population with hand-set round times, for policy-level tests.
struct PolicyFixture {
    std::vector<ClientProfile> profiles;
    std::vector<double> times;
    SelectionState state;
    TrainingConfig train;
    SelectionConfig selection;

    explicit PolicyFixture(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            ClientProfile p;
            p.id = static_cast<int>(i);
            p.compute_power = 100.0 + static_cast<double>(i);
            p.energy_rate = 1.0;
            p.round_overhead = 0.5;
            p.data_size = 20;
            profiles.push_back(p);
            times.push_back(1.0 + 0.1 * static_cast<double>(i));
        }
        train.clients_per_round = 2;
        train.preferred_round_time = 2.0;
        train.q = 2.0;
    }

    PolicyContext ctx(std::uint64_t seed = 7, int round = 1) const {
        PolicyContext c;
        c.profiles = &profiles;
        c.round_times = &times;
        c.state = &state;
        c.train = &train;
        c.selection = &selection;
        c.round = round;
        c.seed = seed;
        return c;
    }
};

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("statistical utility is |k| * rms of losses") {
    CHECK(statistical_utility({3.0, 4.0}) == doctest::Approx(2.0 * std::sqrt(12.5)));
    CHECK(statistical_utility({3.0, 4.0}) == doctest::Approx(7.0710678118654755));
    CHECK(statistical_utility({2.7}) == doctest::Approx(2.7));
    CHECK(statistical_utility({0.0, 0.0, 0.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(statistical_utility({}), std::invalid_argument);
    CHECK_THROWS_AS(statistical_utility({-1.0}), std::invalid_argument);
}

TEST_CASE("time penalty") {
    CHECK(time_penalty(10.0, 20.0, 2.0) == doctest::Approx(0.25));
    CHECK(time_penalty(10.0, 5.0, 3.0) == 1.0);   // under budget: indicator false
    CHECK(time_penalty(10.0, 10.0, 5.0) == 1.0);  // boundary is strict
    CHECK(time_penalty(10.0, 500.0, 0.0) == 1.0); // beta = 0 disables it
    CHECK_THROWS_AS(time_penalty(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(time_penalty(1.0, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("resource priority quotient") {
    ClientProfile p;
    p.compute_power = 2.0;
    p.data_size = 100;
    p.energy_rate = 4.0;
    p.round_overhead = 5.0;
    CHECK(resource_priority(p) == doctest::Approx(10.0));

    ClientProfile unit;
    unit.compute_power = unit.energy_rate = unit.round_overhead = 1.0;
    unit.data_size = 1;
    CHECK(resource_priority(unit) == doctest::Approx(1.0));

    p.compute_power *= 3.0;  // homogeneity in c
    CHECK(resource_priority(p) == doctest::Approx(30.0));
}

TEST_CASE("fedfair3 utility combines the factors") {
    ClientProfile p;
    p.compute_power = 2.0;
    p.data_size = 100;
    p.energy_rate = 4.0;
    p.round_overhead = 5.0;  // lambda = 10

    SUBCASE("slow client gets the time penalty") {
        const double u = fedfair3_utility({3, 4}, p, 10.0, 2.0, 20.0, 0, 0, 5, 0.5);
        CHECK(u == doctest::Approx(7.0710678118654755 * 0.25));
        CHECK(u == doctest::Approx(1.7677669529663689));
    }
    SUBCASE("fast client selected last round gets the lambda boost") {
        const double u = fedfair3_utility({3, 4}, p, 10.0, 2.0, 5.0, 1, 0, 5, 0.5);
        CHECK(u == doctest::Approx(70.710678118654755));
    }
    SUBCASE("fast client not selected last round gets no boost") {
        const double u = fedfair3_utility({3, 4}, p, 10.0, 2.0, 5.0, 0, 0, 5, 0.5);
        CHECK(u == doctest::Approx(7.0710678118654755));
    }
    SUBCASE("participation within the cap is not decayed") {
        const double u = fedfair3_utility({3, 4}, p, 10.0, 2.0, 20.0, 0, 5, 5, 0.5);
        CHECK(u == doctest::Approx(1.7677669529663689));
    }
    SUBCASE("participation beyond the cap decays geometrically") {
        const double u = fedfair3_utility({3, 4}, p, 10.0, 2.0, 20.0, 0, 8, 5, 0.5);
        CHECK(u == doctest::Approx(1.7677669529663689 * 0.125));
    }
    SUBCASE("boundary T == t_i: no penalty, no boost") {
        const double u = fedfair3_utility({3, 4}, p, 10.0, 2.0, 10.0, 1, 0, 5, 0.5);
        CHECK(u == doctest::Approx(7.0710678118654755));
    }
    SUBCASE("gamma must be binary") {
        CHECK_THROWS_AS(fedfair3_utility({3, 4}, p, 10.0, 2.0, 5.0, 2, 0, 5, 0.5),
                        std::invalid_argument);
    }
}

TEST_CASE("utility is monotone in loss magnitudes and in t_i beyond T") {
    ClientProfile p;
    p.compute_power = 1.0;
    p.data_size = 1;
    p.energy_rate = 1.0;
    p.round_overhead = 1.0;
    const double base = fedfair3_utility({1, 2}, p, 10.0, 2.0, 20.0, 0, 0, 5, 0.5);
    CHECK(fedfair3_utility({1, 2.5}, p, 10.0, 2.0, 20.0, 0, 0, 5, 0.5) > base);
    CHECK(fedfair3_utility({1, 2}, p, 10.0, 2.0, 25.0, 0, 0, 5, 0.5) < base);
    // below T the utility does not depend on t_i (lambda branch toggles on gamma)
    CHECK(fedfair3_utility({1, 2}, p, 10.0, 2.0, 5.0, 0, 0, 5, 0.5) ==
          doctest::Approx(fedfair3_utility({1, 2}, p, 10.0, 2.0, 9.0, 0, 0, 5, 0.5)));
}

TEST_CASE("probabilities normalize and fall back to uniform") {
    const auto p = probabilities({{0, 1.0}, {1, 3.0}});
    CHECK(p.at(0) == doctest::Approx(0.25));
    CHECK(p.at(1) == doctest::Approx(0.75));

    const auto single = probabilities({{5, 7.0}});
    CHECK(single.at(5) == doctest::Approx(1.0));

    const auto zeros = probabilities({{0, 0.0}, {1, 0.0}, {2, 0.0}, {3, 0.0}});
    for (const auto& [id, v] : zeros) CHECK(v == doctest::Approx(0.25));

    CHECK_THROWS_AS(probabilities({}), std::invalid_argument);
    CHECK_THROWS_AS(probabilities({{0, -1.0}}), std::invalid_argument);
}

TEST_CASE("simplex property over random utility vectors") {
    rng::Engine eng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        std::map<int, double> utilities;
        const std::size_t n = 1 + eng.uniform_index(50);
        for (std::size_t i = 0; i < n; ++i) {
            utilities[static_cast<int>(i)] = eng.uniform01() < 0.1 ? 0.0 : eng.uniform(0.0, 100.0);
        }
        const auto p = probabilities(utilities);
        double total = 0.0;
        for (const auto& [id, v] : p) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("client weight formula") {
    CHECK(client_weight(0.5, 0.0, 10) == doctest::Approx(0.1));
    CHECK(client_weight(0.5, 2.0, 10) == doctest::Approx(0.25 / 30.0));
    CHECK(client_weight(0.5, 2.0, 10) == doctest::Approx(0.008333333333333333));
    CHECK(client_weight(1.0, 2.0, 1) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(client_weight(0.5, 2.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(client_weight(0.5, -1.0, 1), std::invalid_argument);
}

TEST_CASE("q=0 collapses every weight to 1/N") {
    rng::Engine eng(7);
    for (std::size_t n = 1; n <= 100; ++n) {
        const double p = eng.uniform01();
        CHECK(client_weight(p, 0.0, n) == 1.0 / static_cast<double>(n));
    }
}

TEST_CASE("q-fairness proportionality check") {
    SUBCASE("hand-evaluated two-client case") {
        // LHS terms {1/36, 2/9}, RHS terms {1/12, 2/3}, both ratios 1/3.
        const std::vector<double> p{1.0 / 3.0, 2.0 / 3.0};
        const std::vector<double> F{1.0, 2.0};
        CHECK(qfairness_proportionality_check(p, F, 1.0, 2) <= 1e-12);
    }
    SUBCASE("spread stays ~0 whenever p is proportional to F") {
        rng::Engine eng(17);
        for (const double q : {0.0, 1.0, 2.0, 5.0}) {
            for (const std::size_t n : {std::size_t{2}, std::size_t{10}, std::size_t{100}}) {
                std::vector<double> F(n);
                double total = 0.0;
                for (auto& f : F) {
                    f = eng.uniform(0.1, 5.0);
                    total += f;
                }
                std::vector<double> p(n);
                for (std::size_t i = 0; i < n; ++i) p[i] = F[i] / total;
                CHECK(qfairness_proportionality_check(p, F, q, n) <= 1e-9);
            }
        }
    }
    SUBCASE("perturbing one probability is detected at q > 0") {
        std::vector<double> F{1.0, 2.0, 3.0};
        std::vector<double> p{1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0};
        p[0] *= 1.1;
        CHECK(qfairness_proportionality_check(p, F, 1.0, 3) > 1e-3);
        CHECK(qfairness_proportionality_check(p, F, 2.0, 3) > 1e-3);
    }
    SUBCASE("zero losses are rejected") {
        CHECK_THROWS_AS(qfairness_proportionality_check({0.5, 0.5}, {0.0, 1.0}, 1.0, 2),
                        std::invalid_argument);
    }
}

TEST_CASE("sample_by_priority basics") {
    SUBCASE("m = N returns everyone") {
        const auto picked = sample_by_priority({{0, 0.2}, {1, 0.3}, {2, 0.5}}, 3, 11);
        CHECK(picked.size() == 3);
        std::set<int> s(picked.begin(), picked.end());
        CHECK(s == std::set<int>{0, 1, 2});
    }
    SUBCASE("m larger than N clamps") {
        const auto picked = sample_by_priority({{0, 1.0}}, 5, 11);
        CHECK(picked == std::vector<int>{0});
    }
    SUBCASE("zero-probability client is never drawn while a positive one remains") {
        for (std::uint64_t seed = 0; seed < 300; ++seed) {
            const auto picked = sample_by_priority({{0, 1.0}, {1, 0.0}}, 1, seed);
            CHECK(picked == std::vector<int>{0});
        }
    }
    SUBCASE("deterministic per seed") {
        const std::map<int, double> p{{0, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.4}};
        CHECK(sample_by_priority(p, 2, 5) == sample_by_priority(p, 2, 5));
    }
    SUBCASE("m = 0 rejected") {
        CHECK_THROWS_AS(sample_by_priority({{0, 1.0}}, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("sample_by_priority matches the exact marginal on two clients") {
    // Oracle: Monte Carlo against the exact probability 0.75.
    std::size_t hits = 0;
    const std::size_t trials = 100000;
    for (std::uint64_t seed = 0; seed < trials; ++seed) {
        const auto picked = sample_by_priority({{0, 0.75}, {1, 0.25}}, 1, seed);
        if (picked[0] == 0) ++hits;
    }
    const double freq = static_cast<double>(hits) / static_cast<double>(trials);
    CHECK(freq > 0.74);
    CHECK(freq < 0.76);
}

TEST_CASE("policy names round-trip") {
    for (const auto* name : {"fedfair3", "random", "loss_prop", "oort", "qffl"}) {
        CHECK(policy_to_string(policy_from_string(name)) == name);
    }
    CHECK_THROWS_AS(policy_from_string("fedavg2"), std::invalid_argument);
}

TEST_CASE("random_uniform assigns 1/N and q-derived weights") {
    PolicyFixture fx(4);
    const auto out = select_clients(PolicyKind::random_uniform, fx.ctx());
    for (const auto& [id, p] : out.probabilities) CHECK(p == doctest::Approx(0.25));
    for (const auto& [id, a] : out.weights) {
        CHECK(a == doctest::Approx(client_weight(0.25, fx.train.q, 4)).epsilon(1e-12));
    }
    CHECK(out.selected.size() == 2);
}

TEST_CASE("loss_proportional normalizes mean losses") {
    PolicyFixture fx(2);
    fx.state.explored = {0, 1};
    fx.state.last_losses[0] = {1.0};
    fx.state.last_losses[1] = {3.0};
    const auto out = select_clients(PolicyKind::loss_proportional, fx.ctx());
    CHECK(out.probabilities.at(0) == doctest::Approx(0.25));
    CHECK(out.probabilities.at(1) == doctest::Approx(0.75));
}

TEST_CASE("oort equals fedfair3 with the lambda branch and decay disabled") {
    PolicyFixture fx(5);
    for (int i = 0; i < 5; ++i) {
        fx.state.explored.insert(i);
        fx.state.last_losses[i] = {0.5 + 0.2 * i, 1.0};
        fx.state.gamma[i] = i % 2;
        fx.state.participation_count[i] = i;
    }
    fx.times = {0.5, 1.5, 2.5, 3.5, 4.5};  // straddle T = 2.0

    const auto oort = select_clients(PolicyKind::oort_style, fx.ctx());

    // fedfair3 reduces to oort when gamma never fires and the cap is huge.
    PolicyFixture fx2 = fx;
    fx2.state.gamma.clear();
    fx2.selection.round_cap = 1000000;
    const auto ff3 = select_clients(PolicyKind::fedfair3, fx2.ctx());
    for (const auto& [id, u] : oort.utilities) {
        CHECK(ff3.utilities.at(id) == doctest::Approx(u).epsilon(1e-12));
    }
}

TEST_CASE("qffl keeps loss-proportional weights but samples uniformly") {
    PolicyFixture fx(3);
    fx.state.explored = {0, 1, 2};
    fx.state.last_losses[0] = {1.0};
    fx.state.last_losses[1] = {1.0};
    fx.state.last_losses[2] = {2.0};
    fx.selection.qffl_q = 10.0;
    const auto out = select_clients(PolicyKind::qffl_weighting, fx.ctx());
    CHECK(out.probabilities.at(2) == doctest::Approx(0.5));
    for (const auto& [id, a] : out.weights) {
        CHECK(a == doctest::Approx(client_weight(out.probabilities.at(id), 10.0, 3)));
    }
}

TEST_CASE("never-explored clients inherit the maximum explored utility") {
    PolicyFixture fx(3);
    fx.state.explored = {0};
    fx.state.last_losses[0] = {2.0};
    const auto out = select_clients(PolicyKind::fedfair3, fx.ctx());
    CHECK(out.utilities.at(1) == doctest::Approx(out.utilities.at(0)));
    CHECK(out.utilities.at(2) == doctest::Approx(out.utilities.at(0)));
}

TEST_CASE("empty explored set yields the uniform fallback") {
    PolicyFixture fx(4);
    const auto out = select_clients(PolicyKind::fedfair3, fx.ctx());
    for (const auto& [id, p] : out.probabilities) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("scaling all utilities leaves probabilities, weights, and selection unchanged") {
    rng::Engine eng(55);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<int, double> utilities;
        const std::size_t n = 2 + eng.uniform_index(20);
        for (std::size_t i = 0; i < n; ++i) {
            utilities[static_cast<int>(i)] = eng.uniform(0.0, 10.0);
        }
        const double k = std::exp(eng.uniform(-3.0, 3.0));
        std::map<int, double> scaled;
        for (const auto& [id, u] : utilities) scaled[id] = k * u;

        const auto p1 = probabilities(utilities);
        const auto p2 = probabilities(scaled);
        for (const auto& [id, v] : p1) {
            CHECK(p2.at(id) == doctest::Approx(v).epsilon(1e-12));
            CHECK(client_weight(p2.at(id), 2.0, n) ==
                  doctest::Approx(client_weight(v, 2.0, n)).epsilon(1e-12));
        }
        CHECK(sample_by_priority(p1, 3, 1234) == sample_by_priority(p2, 3, 1234));
    }
}

TEST_CASE("selection outcome invariants: simplex, alpha formula, no duplicate picks") {
    PolicyFixture fx(12);
    for (int i = 0; i < 12; ++i) {
        fx.state.explored.insert(i);
        fx.state.last_losses[i] = {0.1 * (i + 1), 0.3};
        fx.state.participation_count[i] = i % 7;
        fx.state.gamma[i] = (i % 3 == 0) ? 1 : 0;
    }
    fx.train.clients_per_round = 5;
    for (const auto kind : {PolicyKind::fedfair3, PolicyKind::random_uniform,
                            PolicyKind::loss_proportional, PolicyKind::oort_style,
                            PolicyKind::qffl_weighting}) {
        const auto out = select_clients(kind, fx.ctx(31));
        double total = 0.0;
        for (const auto& [id, p] : out.probabilities) {
            CHECK(p >= 0.0);
            total += p;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
        const double q = kind == PolicyKind::qffl_weighting ? fx.selection.qffl_q : fx.train.q;
        for (const auto& [id, a] : out.weights) {
            CHECK(std::abs(a - client_weight(out.probabilities.at(id), q, 12)) <= 1e-12);
        }
        std::set<int> unique(out.selected.begin(), out.selected.end());
        CHECK(unique.size() == out.selected.size());
        CHECK(out.selected.size() == 5);
    }
}

}  // TEST_SUITE
