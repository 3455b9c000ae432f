#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fedfair/client.hpp"
#include "fedfair/rng.hpp"

using namespace fedfair;

namespace {

std::vector<ClientShard> even_shards(const LabeledDataset& ds, std::size_t n_clients) {
    return partition_iid(ds, n_clients, 1);
}

}  // namespace

TEST_SUITE("client") {

TEST_CASE("sample_profiles: zero sigmas collapse to identical clients") {
    const auto ds = generate_synthetic(100, 2, 2, 1.0, 1);
    const auto shards = even_shards(ds, 4);
    HeterogeneitySpec spec;
    spec.sigma_compute = spec.sigma_energy = spec.sigma_overhead = 0.0;
    spec.bandwidth_min = spec.bandwidth_max = 0.1;
    const auto profiles = sample_profiles(4, spec, shards, 9);
    REQUIRE(profiles.size() == 4);
    for (const auto& p : profiles) {
        CHECK(p.compute_power == doctest::Approx(spec.median_compute));
        CHECK(p.energy_rate == doctest::Approx(spec.median_energy));
        CHECK(p.round_overhead == doctest::Approx(spec.median_overhead));
        CHECK(p.bandwidth_cost == doctest::Approx(0.1));
        CHECK(p.data_size == shards[static_cast<std::size_t>(p.id)].size());
    }
}

TEST_CASE("sample_profiles is deterministic per seed") {
    const auto ds = generate_synthetic(100, 2, 2, 1.0, 1);
    const auto shards = even_shards(ds, 10);
    HeterogeneitySpec spec;
    const auto a = sample_profiles(10, spec, shards, 42);
    const auto b = sample_profiles(10, spec, shards, 42);
    CHECK(profiles_to_json(a) == profiles_to_json(b));
    const auto c = sample_profiles(10, spec, shards, 43);
    CHECK(profiles_to_json(a) != profiles_to_json(c));
}

TEST_CASE("sample_profiles rejects a shard/client mismatch") {
    const auto ds = generate_synthetic(100, 2, 2, 1.0, 1);
    const auto shards = even_shards(ds, 4);
    CHECK_THROWS_AS(sample_profiles(5, HeterogeneitySpec{}, shards, 1), std::invalid_argument);
}

TEST_CASE("sigma=1 compute spread exceeds 10x between the 5th and 95th percentile") {
    // Oracle: lognormal quantile ratio exp(2 * 1.645 * sigma) ~ 27 at sigma=1.
    const auto ds = generate_synthetic(2000, 2, 2, 1.0, 1);
    const auto shards = even_shards(ds, 1000);
    HeterogeneitySpec spec;
    spec.sigma_compute = 1.0;
    const auto profiles = sample_profiles(1000, spec, shards, 7);
    std::vector<double> c;
    c.reserve(profiles.size());
    for (const auto& p : profiles) c.push_back(p.compute_power);
    std::sort(c.begin(), c.end());
    const double p5 = c[50];
    const double p95 = c[950];
    CHECK(p95 / p5 > 10.0);
}

TEST_CASE("straggler group is slowed and capped") {
    const auto ds = generate_synthetic(100, 2, 2, 1.0, 1);
    const auto shards = even_shards(ds, 10);
    HeterogeneitySpec spec;
    spec.straggler_fraction = 0.2;
    spec.straggler_slowdown = 8.0;
    spec.straggler_max_compute = 30.0;
    const auto profiles = sample_profiles(10, spec, shards, 3);
    CHECK(profiles[0].compute_power <= 30.0);
    CHECK(profiles[1].compute_power <= 30.0);
    for (std::size_t i = 2; i < 10; ++i) CHECK(profiles[i].compute_power > 30.0);
}

TEST_CASE("simulate_round_time evaluates the formula") {
    ClientProfile p;
    p.compute_power = 100.0;
    p.round_overhead = 1.0;
    p.bandwidth_cost = 0.5;
    CHECK(simulate_round_time(p, 10, 10) == doctest::Approx(2.5));
}

TEST_CASE("round time is monotone in compute, tau, and batch size") {
    rng::Engine eng(15);
    for (int trial = 0; trial < 200; ++trial) {
        ClientProfile p;
        p.compute_power = std::exp(eng.uniform(-2.0, 5.0));
        p.round_overhead = std::exp(eng.uniform(-3.0, 1.0));
        p.bandwidth_cost = eng.uniform(0.0, 1.0);
        const std::size_t tau = 1 + eng.uniform_index(20);
        const std::size_t batch = 1 + eng.uniform_index(200);

        const double t = simulate_round_time(p, tau, batch);
        ClientProfile faster = p;
        faster.compute_power *= 2.0;
        CHECK(simulate_round_time(faster, tau, batch) < t);
        CHECK(simulate_round_time(p, tau + 1, batch) > t);
        CHECK(simulate_round_time(p, tau, batch + 1) > t);
    }
}

TEST_CASE("simulate_round_time rejects tau=0") {
    ClientProfile p;
    CHECK_THROWS_AS(simulate_round_time(p, 0, 10), std::invalid_argument);
    CHECK_THROWS_AS(simulate_round_time(p, 10, 0), std::invalid_argument);
}

TEST_CASE("run_local_round fills the report consistently") {
    const auto ds = generate_synthetic(200, 3, 2, 2.0, 5);
    const auto shards = even_shards(ds, 4);
    HeterogeneitySpec spec;
    const auto profiles = sample_profiles(4, spec, shards, 11);
    TrainingConfig cfg;
    cfg.eta = 0.2;
    cfg.tau = 3;
    cfg.kappa = 16;

    const auto w = ModelParams::zeros(2, 3);
    const auto report = run_local_round(profiles[1], shards[1], ds, w, cfg, 99);

    CHECK(report.id == 1);
    CHECK(report.elapsed_s ==
          doctest::Approx(simulate_round_time(profiles[1], cfg.tau, cfg.kappa)));
    // energy = q_i * t_i exactly
    CHECK(report.resource_usage.at("energy") ==
          doctest::Approx(profiles[1].energy_rate * report.elapsed_s).epsilon(1e-15));
    CHECK(report.resource_usage.at("time") == doctest::Approx(report.elapsed_s));
    CHECK(report.resource_usage.at("compute") == doctest::Approx(3 * 16));

    // grad_i matches loss_and_grad at the incoming parameters
    const auto [loss, grad] = loss_and_grad(w, ds, shards[1].indices);
    (void)loss;
    REQUIRE(report.grad.size() == grad.size());
    for (std::size_t j = 0; j < grad.size(); ++j) {
        CHECK(report.grad[j] == doctest::Approx(grad[j]).epsilon(1e-12));
    }
    CHECK(report.batch_losses.size() == 16);
}

TEST_CASE("identical profile, shard, and seed give identical reports") {
    const auto ds = generate_synthetic(100, 2, 2, 1.5, 21);
    const auto shards = even_shards(ds, 2);
    ClientProfile p;
    p.id = 0;
    p.compute_power = 50;
    p.energy_rate = 2;
    p.round_overhead = 0.5;
    p.data_size = shards[0].size();
    TrainingConfig cfg;
    cfg.tau = 4;
    cfg.kappa = 8;
    const auto w = ModelParams::zeros(2, 2);
    const auto a = run_local_round(p, shards[0], ds, w, cfg, 5);
    const auto b = run_local_round(p, shards[0], ds, w, cfg, 5);
    CHECK(a.params.w == b.params.w);
    CHECK(a.batch_losses == b.batch_losses);
    CHECK(a.grad == b.grad);
    CHECK(a.elapsed_s == b.elapsed_s);
}

TEST_CASE("run_local_round rejects an empty shard") {
    const auto ds = generate_synthetic(10, 2, 2, 1.0, 1);
    ClientProfile p;
    CHECK_THROWS_AS(run_local_round(p, ClientShard{0, {}}, ds, ModelParams::zeros(2, 2),
                                    TrainingConfig{}, 1),
                    std::invalid_argument);
}

TEST_CASE("profiles JSON round-trip validates invariants") {
    const auto ds = generate_synthetic(100, 2, 2, 1.0, 1);
    const auto shards = even_shards(ds, 3);
    const auto profiles = sample_profiles(3, HeterogeneitySpec{}, shards, 1);
    const auto back = profiles_from_json(profiles_to_json(profiles));
    REQUIRE(back.size() == 3);
    CHECK(back[2].compute_power == profiles[2].compute_power);

    CHECK_THROWS_AS(
        profiles_from_json(R"([{"id":0,"compute_power":-1,"data_size":1,)"
                           R"("energy_rate":1,"round_overhead":1,"bandwidth_cost":0}])"),
        std::runtime_error);
}

}  // TEST_SUITE
