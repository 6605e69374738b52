#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "gradsurg/finite_diff.hpp"
#include "gradsurg/objective.hpp"
#include "gradsurg/quadratics.hpp"
#include "gradsurg/rng.hpp"
#include "gradsurg/schedule.hpp"

using namespace gradsurg;

TEST_CASE("central differences recover simple gradients") {
    SECTION("half squared norm") {
        Vec x(1);
        x << 3.0;
        Vec g = finite_difference_gradient(
            [](const Vec& v) { return 0.5 * v.squaredNorm(); }, x);
        REQUIRE(std::abs(g[0] - 3.0) < 1e-8);
    }
    SECTION("constant function") {
        Vec x(3);
        x << 1.0, -2.0, 0.5;
        Vec g = finite_difference_gradient([](const Vec&) { return 7.0; }, x);
        REQUIRE(g.norm() == 0.0);
    }
    SECTION("product rule") {
        Vec x(2);
        x << 2.0, 5.0;
        Vec g = finite_difference_gradient(
            [](const Vec& v) { return v[0] * v[1]; }, x);
        REQUIRE(std::abs(g[0] - 5.0) < 1e-7);
        REQUIRE(std::abs(g[1] - 2.0) < 1e-7);
    }
    SECTION("non-finite objective raises") {
        Vec x(1);
        x << 0.0;
        REQUIRE_THROWS_AS(finite_difference_gradient(
                              [](const Vec& v) { return std::log(v[0] - 1.0); }, x),
                          NumericError);
    }
    SECTION("step must be positive") {
        Vec x(1);
        x << 1.0;
        REQUIRE_THROWS_AS(
            finite_difference_gradient([](const Vec& v) { return v[0]; }, x, 0.0),
            ConfigError);
    }
}

TEST_CASE("seeded rng is deterministic and splittable") {
    SECTION("same seed, same stream") {
        Rng a(0), b(0);
        for (int i = 0; i < 100; ++i) REQUIRE(a.uniform() == b.uniform());
    }
    SECTION("different seeds differ") {
        Rng a(0), b(1);
        int diff = 0;
        for (int i = 0; i < 100; ++i)
            if (a.uniform() != b.uniform()) ++diff;
        REQUIRE(diff > 90);
    }
    SECTION("sub-streams do not depend on draw interleaving") {
        Rng p1(42), p2(42);
        Rng c1a = p1.split();
        Rng c1b = p1.split();
        Rng c2a = p2.split();
        Rng c2b = p2.split();

        // consume the two children of p1 in one order, of p2 in the other
        std::vector<double> s1a, s1b, s2a, s2b;
        for (int i = 0; i < 50; ++i) s1a.push_back(c1a.normal());
        for (int i = 0; i < 50; ++i) s1b.push_back(c1b.normal());
        for (int i = 0; i < 50; ++i) s2b.push_back(c2b.normal());
        for (int i = 0; i < 50; ++i) s2a.push_back(c2a.normal());
        REQUIRE(s1a == s2a);
        REQUIRE(s1b == s2b);
    }
    SECTION("parent draws do not shift split keys") {
        Rng p1(7), p2(7);
        p2.uniform();
        p2.uniform();
        Rng c1 = p1.split();
        Rng c2 = p2.split();
        for (int i = 0; i < 20; ++i) REQUIRE(c1.uniform() == c2.uniform());
    }
    SECTION("permutation covers all indices") {
        Rng r(3);
        auto p = r.permutation(17);
        std::vector<bool> seen(17, false);
        for (auto i : p) seen[i] = true;
        for (bool b : seen) REQUIRE(b);
    }
}

TEST_CASE("schedules emit positive non-increasing values") {
    Schedule c = Schedule::constant(0.5);
    Schedule p = Schedule::power(2.0, 1.01);
    REQUIRE(c(0) == 0.5);
    REQUIRE(c(1000) == 0.5);
    REQUIRE(p(0) == 2.0);
    double prev = p(0);
    for (long t = 1; t < 200; ++t) {
        REQUIRE(p(t) > 0.0);
        REQUIRE(p(t) <= prev);
        prev = p(t);
    }
    REQUIRE_THROWS_AS(Schedule::constant(-1.0).validate("alpha", false), ConfigError);
    REQUIRE_THROWS_AS(Schedule::constant(0.0).validate("alpha", false), ConfigError);
    REQUIRE_NOTHROW(Schedule::constant(0.0).validate("epsilon", true));
}

TEST_CASE("objective pair counts oracle calls by kind") {
    auto quad = scalar_conflict_pair();
    ObjectivePair obj(quad);
    Vec x(1);
    x << 0.5;

    REQUIRE(obj.counts().loss_e == 0);
    obj.loss_e(x);
    obj.loss_p(x);
    REQUIRE(obj.counts().loss_e == 1);
    REQUIRE(obj.counts().loss_p == 1);
    REQUIRE(obj.counts().grad == 0);  // loss calls never count as gradients

    obj.grad_e(x);
    REQUIRE(obj.counts().grad == 1);
    obj.grad_p(x);
    REQUIRE(obj.counts().grad == 2);
    CompositeEval ce = obj.grad_composite(x, 0.3);
    REQUIRE(obj.counts().grad == 3);

    // composite backward returns both forward losses and the mixed gradient
    REQUIRE(ce.loss_e == Catch::Approx(0.125));
    REQUIRE(ce.loss_p == Catch::Approx(0.125));
    REQUIRE(ce.grad[0] == Catch::Approx(0.5 + 0.3 * (-0.5)));

    // probes through raw() stay uncounted
    obj.raw().value_e(x);
    obj.raw().gradient_p(x);
    REQUIRE(obj.counts().loss_e == 1);
    REQUIRE(obj.counts().grad == 3);
}

TEST_CASE("quadratic pair validates curvatures and matches finite differences") {
    Rng rng(11);
    auto q = QuadraticPair::random(6, rng);
    Vec x = rng.normal_vec(6);
    Vec ge = q->gradient_e(x);
    Vec gp = q->gradient_p(x);
    Vec fe = finite_difference_gradient([&](const Vec& v) { return q->value_e(v); }, x);
    Vec fp = finite_difference_gradient([&](const Vec& v) { return q->value_p(v); }, x);
    REQUIRE(gradient_relative_error(ge, fe) < 1e-5);
    REQUIRE(gradient_relative_error(gp, fp) < 1e-5);

    Mat bad(2, 2);
    bad << 1.0, 0.0, 0.0, -1.0;
    Vec c = Vec::Zero(2);
    REQUIRE_THROWS_AS(QuadraticPair(c, bad, c, Mat::Identity(2, 2)), ConfigError);

    // composite argmin is the stationary point of L_e + lambda L_p
    auto conflict = QuadraticPair::conflicting(3);
    Vec argmin = conflict->composite_argmin(0.7);
    Vec resid = conflict->gradient_e(argmin) + 0.7 * conflict->gradient_p(argmin);
    REQUIRE(resid.norm() < 1e-10);
}
