#include <algorithm>
#include <cmath>
#include <random>

#include "countforge/errors.hpp"
#include "countforge/metrics.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace countforge;

namespace {

std::vector<CountRecord> skew_fixture() {
    // 998 moderate images plus two very dense ones.
    std::vector<CountRecord> r;
    std::mt19937_64 gen(2024);
    for (int i = 0; i < 998; ++i) {
        const double gt = 1 + static_cast<double>(gen() % 100);
        const double pred = gt * (1.0 + ((i % 2) ? 0.2 : -0.2));
        r.push_back({"img" + std::to_string(i), gt, pred});
    }
    r.push_back({"dense0", 2000, 3000});
    r.push_back({"dense1", 3000, 4500});
    return r;
}

}  // namespace

TEST_CASE("hand fixtures") {
    const auto two = compute_metrics({{"a", 10, 12}, {"b", 20, 24}});
    CHECK(two.count == 2);
    CHECK(two.mae == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(two.rmse == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
    CHECK(two.nae == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(two.sre == doctest::Approx(std::sqrt(0.6)).epsilon(1e-12));

    const auto one = compute_metrics({{"x", 5, 5.5}});
    CHECK(one.mae == doctest::Approx(0.5));
    CHECK(one.rmse == doctest::Approx(0.5));
    CHECK(one.nae == doctest::Approx(0.1));
    CHECK(one.sre == doctest::Approx(std::sqrt(0.05)).epsilon(1e-12));

    const auto exact = compute_metrics({{"a", 3, 3}, {"b", 7, 7}});
    CHECK(exact.mae == 0.0);
    CHECK(exact.rmse == 0.0);
    CHECK(exact.nae == 0.0);
    CHECK(exact.sre == 0.0);
}

TEST_CASE("record errors") {
    CHECK_THROWS_AS(compute_metrics({}), InvalidInput);
    CHECK_THROWS_AS(compute_metrics({{"a", 2.5, 1}}), InvalidInput);
    CHECK_THROWS_AS(compute_metrics({{"a", -1, 1}}), InvalidInput);
    CHECK_THROWS_AS(compute_metrics({{"a", 1, NAN}}), InvalidInput);
    try {
        compute_metrics({{"ok", 3, 3}, {"empty-img", 0, 1}});
        FAIL("expected ZeroCountError");
    } catch (const ZeroCountError& e) {
        CHECK(e.record_id() == "empty-img");
    }
}

TEST_CASE("agreement with a one-pass reference and permutation invariance") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<CountRecord> recs;
        const int n = 1 + static_cast<int>(gen() % 200);
        for (int i = 0; i < n; ++i) {
            const double gt = 1 + static_cast<double>(gen() % 500);
            recs.push_back({std::to_string(i), gt, gt * 2.0 * u(gen)});
        }
        const auto m = compute_metrics(recs);
        const auto ref = oracle::one_pass_metrics(recs);
        REQUIRE(std::fabs(m.mae - ref.mae) <= 1e-12 * std::max(1.0, ref.mae));
        REQUIRE(std::fabs(m.rmse - ref.rmse) <= 1e-12 * std::max(1.0, ref.rmse));
        REQUIRE(std::fabs(m.nae - ref.nae) <= 1e-12 * std::max(1.0, ref.nae));
        REQUIRE(std::fabs(m.sre - ref.sre) <= 1e-12 * std::max(1.0, ref.sre));
        REQUIRE(m.mae >= 0.0);

        std::shuffle(recs.begin(), recs.end(), gen);
        const auto p = compute_metrics(recs);
        REQUIRE(p.mae == doctest::Approx(m.mae).epsilon(1e-13));
        REQUIRE(p.rmse == doctest::Approx(m.rmse).epsilon(1e-13));
        REQUIRE(p.nae == doctest::Approx(m.nae).epsilon(1e-13));
        REQUIRE(p.sre == doctest::Approx(m.sre).epsilon(1e-13));
    }
}

TEST_CASE("exclusion report") {
    const std::vector<CountRecord> recs{{"big", 1000, 1500}, {"s1", 10, 12}, {"s2", 10, 9}};
    const auto k0 = exclusion_report(recs, 0);
    CHECK(k0.full.rmse == k0.excluded.rmse);
    CHECK(k0.full.nae == k0.excluded.nae);
    CHECK(k0.dropped_ids.empty());

    const auto k1 = exclusion_report(recs, 1);
    CHECK(k1.full.rmse == doctest::Approx(288.68).epsilon(1e-4));
    CHECK(k1.excluded.rmse == doctest::Approx(1.5811).epsilon(1e-4));
    CHECK(k1.full.nae == doctest::Approx(0.26667).epsilon(1e-4));
    CHECK(k1.excluded.nae == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(k1.dropped_ids == std::vector<std::string>{"big"});

    // ties broken by ascending id
    const auto k2 = exclusion_report(recs, 2);
    CHECK(k2.dropped_ids == std::vector<std::string>{"big", "s1"});
    CHECK(k2.excluded.count == 1);
    CHECK(k2.excluded.mae == doctest::Approx(1.0));
    CHECK(k2.excluded.nae == doctest::Approx(0.1));

    CHECK_THROWS_AS(exclusion_report(recs, 3), InvalidInput);
}

TEST_CASE("a few dense images dominate RMSE but not NAE") {
    const auto ex = exclusion_report(skew_fixture(), 2);
    const double d_rmse = std::fabs(ex.excluded.rmse - ex.full.rmse) / ex.full.rmse;
    const double d_nae = std::fabs(ex.excluded.nae - ex.full.nae) / ex.full.nae;
    CHECK(d_rmse > 0.5);
    CHECK(d_nae < 0.05);
}

TEST_CASE("bin_distribution") {
    std::vector<CountRecord> uniform;
    for (int g = 1; g <= 10; ++g) uniform.push_back({std::to_string(g), double(g), double(g)});
    const auto bins = bin_distribution(uniform, 10);
    REQUIRE(bins.size() == 10);
    for (const auto& b : bins) CHECK(b.count == 1);
    CHECK(bins.front().low == 1.0);
    CHECK(bins.back().high == 10.0);

    const auto flat = bin_distribution({{"a", 4, 1}, {"b", 4, 2}, {"c", 4, 3}}, 5);
    CHECK(flat[0].count == 3);
    for (std::size_t b = 1; b < flat.size(); ++b) CHECK(flat[b].count == 0);

    const auto skew = bin_distribution(skew_fixture(), 20);
    CHECK(skew.back().count == 1);  // 3000 alone
    std::size_t total = 0;
    for (const auto& b : skew) total += b.count;
    CHECK(total == 1000);
    // the two dense images are the only records above 100
    std::size_t above = 0;
    for (const auto& b : skew) {
        if (b.low > 100) above += b.count;
    }
    CHECK(above == 2);

    CHECK_THROWS_AS(bin_distribution(uniform, 0), InvalidInput);
}
