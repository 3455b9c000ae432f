#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "fedfair/metrics.hpp"
#include "fedfair/rng.hpp"

using namespace fedfair;

namespace {

// Tiny stack-based well-formedness check for the emitted SVG (tags balance,
// attributes quoted by construction).
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t pos = 0;
    while ((pos = text.find('<', pos)) != std::string::npos) {
        const std::size_t end = text.find('>', pos);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;  // prolog/comment
        const bool closing = tag[0] == '/';
        const bool self_closing = tag.back() == '/';
        std::string name = tag.substr(closing ? 1 : 0);
        const std::size_t sp = name.find_first_of(" \t\n/");
        if (sp != std::string::npos) name = name.substr(0, sp);
        if (closing) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!self_closing) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentResult tiny_result(const std::string& policy, std::uint64_t seed, int rounds) {
    ExperimentResult r;
    r.policy = policy;
    r.seed = seed;
    r.final_model = ModelParams::zeros(2, 2);
    for (int k = 1; k <= rounds; ++k) {
        RoundRecord rec;
        rec.round = k;
        rec.global_accuracy = 0.5 + 0.01 * k + 0.001 * static_cast<double>(seed);
        rec.per_client_accuracy = {0.4, 0.6};
        rec.accuracy_variance = variance_uniformity(rec.per_client_accuracy);
        rec.cosine_uniformity = cosine_uniformity(rec.per_client_accuracy);
        rec.participation_counts = {k, k};
        rec.jain_participation = 1.0;
        rec.sim_clock_s = 2.0 * k;
        rec.selected = {0, 1};
        r.rounds.push_back(rec);
    }
    if (rounds > 0) {
        r.final_per_client_accuracy = r.rounds.back().per_client_accuracy;
        r.final_participation_counts = r.rounds.back().participation_counts;
    }
    return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("per-client accuracy on a perfect and a zero model") {
    const auto ds = generate_synthetic(400, 3, 2, 6.0, 9);
    const auto shards = partition_iid(ds, 2, 1);

    SUBCASE("vector length equals the number of clients") {
        const auto acc = accuracy_per_client(ModelParams::zeros(2, 3), shards, ds);
        CHECK(acc.size() == 2);
    }

    SUBCASE("zero model predicts class 0 everywhere (ties break low)") {
        // Oracle: exact count of class-0 labels per shard.
        const auto acc = accuracy_per_client(ModelParams::zeros(2, 3), shards, ds);
        for (std::size_t k = 0; k < shards.size(); ++k) {
            std::size_t zeros = 0;
            for (const std::size_t i : shards[k].indices) {
                if (ds.labels[i] == 0) ++zeros;
            }
            const double expect =
                static_cast<double>(zeros) / static_cast<double>(shards[k].size());
            CHECK(acc[k] == doctest::Approx(expect));
            CHECK(acc[k] == doctest::Approx(0.5).epsilon(0.25));  // balanced shards
        }
    }

    SUBCASE("empty shard is rejected") {
        CHECK_THROWS_AS(accuracy_per_client(ModelParams::zeros(2, 3), {ClientShard{0, {}}}, ds),
                        std::invalid_argument);
    }
}

TEST_CASE("variance uniformity") {
    CHECK(variance_uniformity({0.9, 0.9, 0.9}) == doctest::Approx(0.0));
    CHECK(variance_uniformity({0.0, 1.0}) == doctest::Approx(0.25));
    // permutation invariance
    CHECK(variance_uniformity({0.1, 0.5, 0.9}) == doctest::Approx(variance_uniformity({0.9, 0.1, 0.5})));
    CHECK_THROWS_AS(variance_uniformity({}), std::invalid_argument);
}

TEST_CASE("cosine uniformity") {
    CHECK(cosine_uniformity({0.7, 0.7, 0.7, 0.7}) == doctest::Approx(1.0));
    CHECK(cosine_uniformity({3.0, 4.0}) == doctest::Approx(3.5 / std::sqrt(12.5)));
    CHECK(cosine_uniformity({3.0, 4.0}) == doctest::Approx(0.98994949366));
    // scale invariance
    CHECK(cosine_uniformity({1.0, 2.0, 3.0}) ==
          doctest::Approx(cosine_uniformity({10.0, 20.0, 30.0})));
    CHECK_THROWS_AS(cosine_uniformity({0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(cosine_uniformity({-0.1, 0.5}), std::invalid_argument);
}

TEST_CASE("cosine uniformity is 1 only for constant vectors") {
    rng::Engine eng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(4);
        for (auto& x : v) x = eng.uniform(0.1, 1.0);
        const double c = cosine_uniformity(v);
        CHECK(c <= 1.0 + 1e-12);
        const double spread = *std::max_element(v.begin(), v.end()) -
                              *std::min_element(v.begin(), v.end());
        if (spread > 1e-6) CHECK(c < 1.0);
    }
}

TEST_CASE("jain participation index") {
    CHECK(participation_fairness({5, 5, 5, 5}) == doctest::Approx(1.0));
    CHECK(participation_fairness({1, 0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(participation_fairness({0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(participation_fairness({}), std::invalid_argument);

    // Oracle: adding a constant pushes the index toward 1 on random vectors.
    rng::Engine eng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> counts(6);
        for (auto& c : counts) c = static_cast<int>(eng.uniform_index(20));
        if (std::all_of(counts.begin(), counts.end(), [](int c) { return c == 0; })) continue;
        std::vector<int> shifted = counts;
        for (auto& c : shifted) c += 7;
        CHECK(participation_fairness(shifted) >= participation_fairness(counts) - 1e-12);
    }
}

TEST_CASE("lower variance associates with higher cosine at fixed mean") {
    // Spearman rank correlation between variance and cosine over random
    // vectors rescaled to a common mean must be strongly negative.
    rng::Engine eng(12);
    const int n = 1000;
    std::vector<double> vars, coss;
    for (int trial = 0; trial < n; ++trial) {
        std::vector<double> v(8);
        for (auto& x : v) x = eng.uniform(0.05, 1.0);
        double mean = 0.0;
        for (const double x : v) mean += x;
        mean /= 8.0;
        for (auto& x : v) x *= 0.5 / mean;  // fixed mean 0.5
        vars.push_back(variance_uniformity(v));
        coss.push_back(cosine_uniformity(v));
    }
    const auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> rank(v.size());
        for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<double>(k);
        return rank;
    };
    const auto rv = ranks(vars);
    const auto rc = ranks(coss);
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) d2 += (rv[static_cast<std::size_t>(i)] - rc[static_cast<std::size_t>(i)]) *
                                      (rv[static_cast<std::size_t>(i)] - rc[static_cast<std::size_t>(i)]);
    const double rho = 1.0 - 6.0 * d2 / (static_cast<double>(n) * (n * n - 1.0));
    CHECK(rho < 0.0);
    CHECK(rho < -0.9);  // the association is essentially monotone
}

TEST_CASE("result JSON round-trips") {
    const auto r = tiny_result("fedfair3", 3, 4);
    const auto text = result_to_json(r);
    const auto back = result_from_json(text);
    CHECK(result_to_json(back) == text);
    CHECK(back.rounds.size() == 4);
    CHECK(back.policy == "fedfair3");
}

TEST_CASE("emit_reports writes csv, summary, and well-formed charts") {
    const auto dir =
        (std::filesystem::temp_directory_path() / "fedfair_reports_test").string();
    std::filesystem::remove_all(dir);

    std::vector<ExperimentResult> results;
    for (std::uint64_t seed : {1, 2, 3}) results.push_back(tiny_result("fedfair3", seed, 5));
    for (std::uint64_t seed : {1, 2, 3}) results.push_back(tiny_result("random", seed, 5));
    emit_reports(results, dir);

    SUBCASE("csv has one row per round per result plus a header") {
        const auto csv = slurp(dir + "/rounds.csv");
        const auto rows = std::count(csv.begin(), csv.end(), '\n');
        CHECK(rows == 1 + 6 * 5);
        CHECK(csv.rfind("round,policy,seed,global_acc,acc_variance,cosine_unif,"
                        "jain_participation,sim_clock_s",
                        0) == 0);
    }

    SUBCASE("summary aggregates exactly the three seeds with mean and std") {
        const auto summary = slurp(dir + "/summary.json");
        CHECK(summary.find("\"seeds\": 3") != std::string::npos);
        // hand-checked mean over seeds 1,2,3 of 0.5 + 0.05 + 0.001*seed
        CHECK(summary.find("\"mean\": 0.552") != std::string::npos);
    }

    SUBCASE("charts parse as well-formed xml") {
        for (const char* name : {"/variance_vs_round.svg", "/accuracy_vs_clock.svg"}) {
            const auto svg = slurp(dir + name);
            CHECK(!svg.empty());
            CHECK(xml_well_formed(svg));
        }
    }

    SUBCASE("empty result list is rejected") {
        CHECK_THROWS_AS(emit_reports({}, dir), std::invalid_argument);
    }
}

}  // TEST_SUITE
