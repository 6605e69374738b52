#include <catch2/catch_amalgamated.hpp>

#include "gradsurg/baselines.hpp"
#include "gradsurg/rng.hpp"

using namespace gradsurg;

namespace {

GradientPair pair2(double e0, double e1, double p0, double p1) {
    Vec e(2), p(2);
    e << e0, e1;
    p << p0, p1;
    return {e, p};
}

// gamma-grid oracle for the min-norm combination
double grid_min_norm(const GradientPair& g, double step = 1e-5) {
    double best = (g.e).norm();
    for (double gamma = 0.0; gamma <= 1.0; gamma += step)
        best = std::min(best, (gamma * g.e + (1.0 - gamma) * g.p).norm());
    return best;
}

}  // namespace

TEST_CASE("linear scalarization direction") {
    GradientPair g = pair2(1, 0, 0, 1);
    REQUIRE(linear_direction(g, 0.0) == g.e);
    Vec d = linear_direction(g, 1.0);
    REQUIRE(d[0] == 1.0);
    REQUIRE(d[1] == 1.0);
    GradientPair opp = pair2(1, 0, -1, 0);
    Vec dom = linear_direction(opp, 10.0);
    REQUIRE(dom[0] == Catch::Approx(-9.0));
    REQUIRE_THROWS_AS(linear_direction(g, -0.5), ConfigError);
}

TEST_CASE("pcgrad projects only conflicting pairs") {
    SECTION("orthogonal pair passes through as a sum") {
        Vec d = pcgrad_direction(pair2(1, 0, 0, 1));
        REQUIRE(d[0] == 1.0);
        REQUIRE(d[1] == 1.0);
    }
    SECTION("full opposition cancels") {
        Vec d = pcgrad_direction(pair2(1, 0, -1, 0));
        REQUIRE(d.norm() == 0.0);
    }
    SECTION("partial conflict, hand-derived") {
        // g_e' = g_e - (dot/|g_p|^2) g_p = (0.5, 0.5); g_p' = g_p + g_e = (0, 1)
        Vec d = pcgrad_direction(pair2(1, 0, -1, 1));
        REQUIRE(d[0] == Catch::Approx(0.5));
        REQUIRE(d[1] == Catch::Approx(1.5));
    }
    SECTION("zero counterpart skips that projection") {
        GradientPair g = pair2(1, 0, 0, 0);
        Vec d = pcgrad_direction(g);
        REQUIRE(d == g.e + g.p);
    }
    SECTION("projected direction never fights either objective") {
        Rng rng(5);
        for (int i = 0; i < 300; ++i) {
            const auto dim = static_cast<Eigen::Index>(2 + rng.below(10));
            GradientPair g(rng.normal_vec(dim), rng.normal_vec(dim));
            Vec d = pcgrad_direction(g);
            REQUIRE(g.e.dot(d) >= -1e-12);
            REQUIRE(g.p.dot(d) >= -1e-12);
        }
    }
}

TEST_CASE("mgda finds the min-norm hull point") {
    SECTION("identical gradients") {
        GradientPair g = pair2(2, 0, 2, 0);
        Vec d = mgda_direction(g);
        REQUIRE(d[0] == 2.0);
        REQUIRE(d[1] == 0.0);
    }
    SECTION("opposed equal norms contain zero") {
        Vec d = mgda_direction(pair2(1, 0, -1, 0));
        REQUIRE(d.norm() == 0.0);
    }
    SECTION("orthogonal equal norms, grid-checked") {
        GradientPair g = pair2(1, 0, 0, 1);
        Vec d = mgda_direction(g);
        REQUIRE(d[0] == Catch::Approx(0.5));
        REQUIRE(d[1] == Catch::Approx(0.5));
        REQUIRE(std::abs(d.norm() - grid_min_norm(g)) < 1e-6);
    }
    SECTION("norm bounded by both inputs and matching the grid") {
        Rng rng(9);
        for (int i = 0; i < 100; ++i) {
            const auto dim = static_cast<Eigen::Index>(2 + rng.below(6));
            GradientPair g(rng.normal_vec(dim), rng.normal_vec(dim));
            Vec d = mgda_direction(g);
            REQUIRE(d.norm() <= std::min(g.e.norm(), g.p.norm()) + 1e-12);
            REQUIRE(std::abs(d.norm() - grid_min_norm(g)) < 1e-4);
        }
    }
}

TEST_CASE("orthogonal gradients collapse every baseline to the plain sum") {
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
        const auto dim = static_cast<Eigen::Index>(2 + rng.below(6));
        Vec a = rng.normal_vec(dim);
        Vec b = rng.normal_vec(dim);
        b -= (a.dot(b) / a.squaredNorm()) * a;  // orthogonalize
        b *= a.norm() / b.norm();               // equalize norms
        GradientPair g(a, b);
        Vec sum = a + b;
        REQUIRE((linear_direction(g, 1.0) - sum).norm() < 1e-12);
        REQUIRE((pcgrad_direction(g) - sum).norm() < 1e-9);
        REQUIRE((mgda_direction(g) - 0.5 * sum).norm() < 1e-9);
    }
}
