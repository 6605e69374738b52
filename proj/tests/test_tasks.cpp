#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "gradsurg/finite_diff.hpp"
#include "gradsurg/tasks.hpp"

using namespace gradsurg;
using namespace gradsurg::toy;

namespace {

struct Fixture {
    std::shared_ptr<ToyFlowModel> flow;
    std::shared_ptr<ToyAttention> attn;
    std::shared_ptr<ImageUnlearnTask> task;
};

Fixture make_fixture(std::uint64_t seed, bool pretrain = false,
                     LossWeights weights = LossWeights{}) {
    Rng rng(seed);
    Rng flow_rng = rng.split();
    Rng attn_rng = rng.split();
    Rng train_rng = rng.split();
    Rng bank_rng = rng.split();
    ConceptWorld world(3);
    auto flow = std::make_shared<ToyFlowModel>(world, FlowArch{}, flow_rng);
    if (pretrain) flow->pretrain(train_rng);
    AttnVocab vocab;
    vocab.k_irrelevant = world.k_irrelevant;
    auto attn = std::make_shared<ToyAttention>(vocab, AttnArch{}, attn_rng);
    TaskShape shape;
    shape.esd_probes = 8;
    shape.retention_probes_per_concept = 4;
    shape.attention_probes = 2;
    auto task = make_image_task(flow, attn, weights, shape, bank_rng);
    return {flow, attn, task};
}

}  // namespace

TEST_CASE("image task composes its four loss terms") {
    Fixture fx = make_fixture(42);
    Rng rng(1);
    Vec params = rng.normal_vec(fx.task->dim(), 0.05);

    const double esd = fx.task->erasure_loss(params);
    const double attn_pen = fx.task->attention_penalty(params);
    const double ret = fx.task->retention_loss(params);
    const double rsc = fx.task->contrastive_loss(params);
    const LossWeights& w = fx.task->weights();

    REQUIRE(fx.task->value_e(params) == Catch::Approx(esd + w.gamma1 * attn_pen));
    REQUIRE(fx.task->value_p(params) == Catch::Approx(ret + w.gamma2 * rsc));
    REQUIRE(ret >= 0.0);
    REQUIRE(esd >= 0.0);
    REQUIRE(attn_pen >= 0.0);

    SECTION("gamma1 = 0 leaves the velocity term alone") {
        LossWeights w0;
        w0.gamma1 = 0.0;
        Fixture fx0 = make_fixture(42, false, w0);
        REQUIRE(fx0.task->value_e(params) ==
                Catch::Approx(fx0.task->erasure_loss(params)));
    }
    SECTION("gamma2 = 0 leaves the retention term alone") {
        LossWeights w0;
        w0.gamma2 = 0.0;
        Fixture fx0 = make_fixture(42, false, w0);
        REQUIRE(fx0.task->value_p(params) ==
                Catch::Approx(fx0.task->retention_loss(params)));
    }
}

TEST_CASE("retention loss vanishes at zero delta") {
    Fixture fx = make_fixture(43);
    Vec zero = Vec::Zero(fx.task->dim());
    REQUIRE(fx.task->retention_loss(zero) == 0.0);
    // adapted and frozen fields coincide, so only the guidance term remains
    REQUIRE(fx.task->value_e(zero) >= 0.0);
}

TEST_CASE("task gradients match finite differences") {
    Fixture fx = make_fixture(44);
    Rng rng(2);
    const Eigen::Index n = fx.task->dim();
    for (int trial = 0; trial < 3; ++trial) {
        Vec params = rng.normal_vec(n, 0.05);

        Vec ge = fx.task->gradient_e(params);
        Vec fe = finite_difference_gradient(
            [&](const Vec& p) { return fx.task->value_e(p); }, params);
        REQUIRE(gradient_relative_error(ge, fe) < 1e-5);

        Vec gp = fx.task->gradient_p(params);
        Vec fp = finite_difference_gradient(
            [&](const Vec& p) { return fx.task->value_p(p); }, params);
        REQUIRE(gradient_relative_error(gp, fp) < 1e-5);
    }
}

TEST_CASE("attention-only task narrows the parameter vector") {
    Fixture fx = make_fixture(45);
    auto narrow = std::make_shared<AttentionOnlyTask>(fx.task);
    REQUIRE(narrow->dim() == fx.task->attn_dim());
    Rng rng(3);
    Vec params = rng.normal_vec(narrow->dim(), 0.1);
    Vec g = narrow->gradient_e(params);
    Vec f = finite_difference_gradient(
        [&](const Vec& p) { return narrow->value_e(p); }, params);
    REQUIRE(gradient_relative_error(g, f) < 1e-5);
}

TEST_CASE("single-frame video equals the image objective bitwise") {
    Rng rng_a(77);
    Rng a1 = rng_a.split(), a2 = rng_a.split(), a3 = rng_a.split();
    ConceptWorld world(3);
    auto flow = std::make_shared<ToyFlowModel>(world, FlowArch{}, a1);
    AttnVocab vocab;
    auto attn = std::make_shared<ToyAttention>(vocab, AttnArch{}, a2);
    TaskShape shape;
    shape.esd_probes = 6;
    shape.retention_probes_per_concept = 3;
    shape.attention_probes = 2;

    // the video builder gives each frame a split of its stream; replay the
    // same construction by hand for the single-frame case
    Rng video_rng = a3;
    auto video = make_video_task(flow, attn, LossWeights{}, shape, 1, video_rng);
    Rng mirror = a3;
    Rng frame_rng = mirror.split();
    auto image = make_image_task(flow, attn, LossWeights{}, shape, frame_rng);

    Rng probe(4);
    for (int i = 0; i < 5; ++i) {
        Vec params = probe.normal_vec(video->dim(), 0.08);
        REQUIRE(video->value_e(params) == image->value_e(params));
        REQUIRE(video->value_p(params) == image->value_p(params));
        Vec gv = video->gradient_e(params);
        Vec gi = image->gradient_e(params);
        REQUIRE((gv - gi).norm() == 0.0);
    }
}

TEST_CASE("volumetric penalty is the frame mean and ignores duplication") {
    Rng rng(88);
    Rng r1 = rng.split(), r2 = rng.split(), r3 = rng.split();
    ConceptWorld world(3);
    auto flow = std::make_shared<ToyFlowModel>(world, FlowArch{}, r1);
    auto attn = std::make_shared<ToyAttention>(AttnVocab{}, AttnArch{}, r2);
    TaskShape shape;
    shape.esd_probes = 4;
    shape.retention_probes_per_concept = 2;
    shape.attention_probes = 2;
    auto video = make_video_task(flow, attn, LossWeights{}, shape, 4, r3);

    Rng probe(5);
    Vec params = probe.normal_vec(video->dim(), 0.1);

    double mean = 0.0;
    for (int f = 0; f < video->frame_count(); ++f)
        mean += video->frame(f).attention_penalty(params);
    mean /= video->frame_count();
    REQUIRE(video->volumetric_attention_penalty(params) == Catch::Approx(mean));

    // duplicating every frame leaves the frame-mean unchanged
    std::vector<std::shared_ptr<ImageUnlearnTask>> doubled;
    for (int rep = 0; rep < 2; ++rep)
        for (int f = 0; f < video->frame_count(); ++f)
            doubled.push_back(std::make_shared<ImageUnlearnTask>(video->frame(f)));
    VideoUnlearnTask dup(doubled);
    REQUIRE(dup.volumetric_attention_penalty(params) ==
            Catch::Approx(video->volumetric_attention_penalty(params)));

    SECTION("multi-frame gradients still match finite differences") {
        Vec ge = video->gradient_e(params);
        Vec fe = finite_difference_gradient(
            [&](const Vec& p) { return video->value_e(p); }, params);
        REQUIRE(gradient_relative_error(ge, fe) < 1e-5);
    }
}

TEST_CASE("pretrained base model scores high accuracy everywhere") {
    Fixture fx = make_fixture(4242, true);
    Rng rng(6);
    FlowLora zero = fx.flow->unpack(fx.flow->zero_lora());
    AccuracyReport rep = measure_accuracy(*fx.flow, zero, 100, 32, 0.4, rng);
    INFO("target " << rep.acc_target << " irrelevant " << rep.acc_irrelevant);
    REQUIRE(rep.acc_target >= 0.8);
    REQUIRE(rep.acc_irrelevant >= 0.8);
    REQUIRE(rep.balance() == Catch::Approx(rep.acc_irrelevant - rep.acc_target));
}
