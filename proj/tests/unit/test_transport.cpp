#include <cmath>
#include <random>

#include "countforge/errors.hpp"
#include "countforge/transport.hpp"
#include "doctest.h"

using namespace countforge;

TEST_CASE("grid_coords") {
    const auto one = grid_coords(1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == Point{0.5, 0.5});
    CHECK(grid_coords(2, 2)[0] == Point{0.25, 0.25});
    const auto wide = grid_coords(2, 4);
    CHECK(wide.size() == 8);
    CHECK(wide[0] == Point{0.125, 0.125});
    // row-major: second entry is the next column
    CHECK(wide[1] == Point{0.375, 0.125});
    CHECK(wide[4] == Point{0.125, 0.375});
}

TEST_CASE("cost_matrix values") {
    CHECK(cost_matrix({{0.3, 0.4}}, {{{0.3, 0.4}}})(0, 0) == 1.0);
    CHECK(cost_matrix({{0.0, 0.0}}, {{{0.6, 0.0}}}, 0.6)(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    CHECK(cost_matrix({{0.0, 0.0}}, {{{1.0, 0.0}}}, 0.6)(0, 0) == doctest::Approx(5.294490).epsilon(1e-6));
}

TEST_CASE("cost_matrix rejects bad input") {
    CHECK_THROWS_AS(cost_matrix({{0.0, 0.0}}, {{{0.5, 0.5}}}, 0.0), InvalidInput);
    CHECK_THROWS_AS(cost_matrix({{0.0, 0.0}}, {{{1.5, 0.5}}}), InvalidInput);
    CHECK_THROWS_AS(cost_matrix({{-0.1, 0.0}}, {{{0.5, 0.5}}}), InvalidInput);
}

TEST_CASE("grid_cost_matrix places points in the cell frame") {
    // A point at the centre of cell (1, 2) of a 3 x 4 grid has cost 1 there.
    const auto c = grid_cost_matrix(3, 4, {{{2.5, 1.5}}});
    CHECK(c.n == 12);
    CHECK(c.m == 1);
    CHECK(c(1 * 4 + 2, 0) == doctest::Approx(1.0).epsilon(1e-15));
    // one cell to the right: distance 1/D = 0.25
    CHECK(c(1 * 4 + 3, 0) == doctest::Approx(std::exp(0.25 / 0.6)).epsilon(1e-12));
}

TEST_CASE("cost properties (random)") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        CoordList cells;
        PointSet pts;
        for (int i = 0; i < 7; ++i) cells.push_back({u(gen), u(gen)});
        for (int j = 0; j < 5; ++j) pts.points.push_back({u(gen), u(gen)});
        const double eta = 0.1 + u(gen);
        const auto c = cost_matrix(cells, pts, eta);

        const double bound = std::exp(std::sqrt(2.0) / eta);
        for (double v : c.values) {
            REQUIRE(v >= 1.0);
            REQUIRE(v <= bound * (1 + 1e-12));
        }

        // Equivariance: permuting points permutes columns.
        std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        PointSet shuffled;
        for (auto k : perm) shuffled.points.push_back(pts.points[k]);
        const auto cs = cost_matrix(cells, shuffled, eta);
        for (std::size_t i = 0; i < 7; ++i) {
            for (std::size_t j = 0; j < 5; ++j) REQUIRE(cs(i, j) == c(i, perm[j]));
        }
    }
}

TEST_CASE("cost strictly increases with distance") {
    double prev = 0.0;
    for (int k = 0; k <= 40; ++k) {
        const double d = k / 40.0;
        const double v = cost_matrix({{0.0, 0.0}}, {{{d, 0.0}}}, 0.6)(0, 0);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("default eta bound") {
    const auto c = cost_matrix({{0.0, 0.0}}, {{{1.0, 1.0}}});
    CHECK(c(0, 0) == doctest::Approx(10.56).epsilon(1e-3));
}
