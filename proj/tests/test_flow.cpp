#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "gradsurg/finite_diff.hpp"
#include "gradsurg/flow.hpp"
#include "gradsurg/rng.hpp"

using namespace gradsurg;
using namespace gradsurg::toy;

namespace {

std::shared_ptr<ToyFlowModel> fresh_model(std::uint64_t seed = 101) {
    Rng rng(seed);
    return std::make_shared<ToyFlowModel>(ConceptWorld(3), FlowArch{}, rng);
}

}  // namespace

TEST_CASE("concept world exposes modes per generative token") {
    ConceptWorld w(3);
    REQUIRE(w.n_tokens() == 6);  // null + target + synonym + 3 irrelevant
    REQUIRE(w.n_generative() == 5);
    REQUIRE_THROWS_AS(w.mode_of(ConceptWorld::kNull), ConfigError);
    // target and synonym modes sit close together, irrelevant ones far away
    const double d_syn = (w.mode_of(1) - w.mode_of(2)).norm();
    for (int k = 0; k < 3; ++k) {
        const double d_irr = (w.mode_of(1) - w.mode_of(w.irrelevant_token(k))).norm();
        REQUIRE(d_irr > d_syn);
    }
}

TEST_CASE("zero delta reproduces the frozen field exactly") {
    auto model = fresh_model();
    FlowLora zero = model->unpack(model->zero_lora());
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const Vec2 x(rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double t = rng.uniform();
        const int tok = static_cast<int>(rng.below(6));
        Vec2 a = model->velocity_base(x, tok, t);
        Vec2 b = model->velocity(x, tok, t, zero);
        REQUIRE(a == b);  // bitwise
        REQUIRE(std::isfinite(b[0]));
        REQUIRE(std::isfinite(b[1]));
    }
}

TEST_CASE("adapter gradients match finite differences") {
    auto model = fresh_model();
    Rng rng(6);
    const Eigen::Index n = model->lora_dim();
    for (int trial = 0; trial < 5; ++trial) {
        Vec params = rng.normal_vec(n, 0.05);
        const Vec2 x(rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double t = rng.uniform();
        const int tok = 1 + static_cast<int>(rng.below(5));
        const Vec2 w(rng.normal(), rng.normal());

        auto scalar = [&](const Vec& p) {
            return w.dot(model->velocity(x, tok, t, model->unpack(p)));
        };
        Vec analytic = Vec::Zero(n);
        model->velocity_with_grad(x, tok, t, model->unpack(params), w, analytic);
        Vec numeric = finite_difference_gradient(scalar, params);
        REQUIRE(gradient_relative_error(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("euler integration follows simple fields") {
    SECTION("zero field keeps the start point") {
        auto r = euler_integrate([](const Vec2&, double) { return Vec2(0, 0); },
                                 Vec2(0.3, -0.2), 10);
        REQUIRE(r.has_value());
        REQUIRE((*r - Vec2(0.3, -0.2)).norm() == 0.0);
    }
    SECTION("constant field translates by one unit of time") {
        auto r = euler_integrate([](const Vec2&, double) { return Vec2(1, 0); },
                                 Vec2(2.0, 1.0), 10);
        REQUIRE((*r - Vec2(3.0, 1.0)).norm() < 1e-12);
    }
    SECTION("diverging field is flagged") {
        auto r = euler_integrate(
            [](const Vec2& x, double) { return Vec2(1e7 * (1.0 + x.norm()), 0); },
            Vec2(1, 0), 4);
        REQUIRE_FALSE(r.has_value());
    }
}

TEST_CASE("concept accuracy counts hits within the radius") {
    std::vector<std::optional<Vec2>> at_mode(10, Vec2(1.0, 0.0));
    REQUIRE(concept_accuracy(at_mode, Vec2(1.0, 0.0), 0.25) == 1.0);

    std::vector<std::optional<Vec2>> far(10, Vec2(1.5, 0.0));
    REQUIRE(concept_accuracy(far, Vec2(1.0, 0.0), 0.25) == 0.0);

    std::vector<std::optional<Vec2>> half;
    for (int i = 0; i < 5; ++i) half.emplace_back(Vec2(1.0, 0.0));
    for (int i = 0; i < 5; ++i) half.emplace_back(Vec2(2.0, 0.0));
    REQUIRE(concept_accuracy(half, Vec2(1.0, 0.0), 0.25) == 0.5);

    REQUIRE_THROWS_AS(concept_accuracy({}, Vec2(0, 0), 0.25), ConfigError);
    REQUIRE_THROWS_AS(concept_accuracy(at_mode, Vec2(0, 0), 0.0), ConfigError);
}

TEST_CASE("pretraining teaches every token to reach its mode") {
    Rng rng(2718);
    auto model = std::make_shared<ToyFlowModel>(ConceptWorld(3), FlowArch{}, rng);
    Rng train = rng.split();
    model->pretrain(train);

    FlowLora zero = model->unpack(model->zero_lora());
    Rng sample = rng.split();
    const ConceptWorld& w = model->world();
    for (int tok = 1; tok <= w.n_generative(); ++tok) {
        std::vector<std::optional<Vec2>> pts;
        for (int i = 0; i < 100; ++i) {
            Vec2 start(sample.normal(), sample.normal());
            pts.push_back(euler_sample(*model, zero, start, tok, 32));
        }
        const double acc = concept_accuracy(pts, w.mode_of(tok), 0.4);
        INFO("token " << tok << " accuracy " << acc);
        REQUIRE(acc >= 0.8);
    }

    SECTION("fine and coarse sampling land close on the smooth field") {
        Rng probe = rng.split();
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            Vec2 start(probe.normal(), probe.normal());
            auto coarse = euler_sample(*model, zero, start, 1, 32);
            auto fine = euler_sample(*model, zero, start, 1, 1024);
            REQUIRE(coarse.has_value());
            REQUIRE(fine.has_value());
            worst = std::max(worst, (*coarse - *fine).norm());
        }
        REQUIRE(worst < 0.05);
    }
}
