#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

#include "gradsurg/attention.hpp"
#include "gradsurg/finite_diff.hpp"
#include "gradsurg/rng.hpp"

using namespace gradsurg;
using namespace gradsurg::toy;

namespace {

std::shared_ptr<ToyAttention> fresh_attention(std::uint64_t seed = 303) {
    Rng rng(seed);
    return std::make_shared<ToyAttention>(AttnVocab{}, AttnArch{}, rng);
}

Prompt simple_prompt(const AttnVocab& vocab) {
    Prompt p;
    p.tokens = {vocab.filler(0), vocab.filler(1), AttnVocab::kTarget,
                vocab.filler(2), vocab.filler(3), vocab.filler(4)};
    p.concept_positions = {2};
    return p;
}

}  // namespace

TEST_CASE("attention rows are probability distributions") {
    auto attn = fresh_attention();
    Prompt prompt = simple_prompt(attn->vocab());
    Rng rng(4);

    auto base = attn->attention_base(prompt, 0.9);
    REQUIRE(ToyAttention::max_row_sum_error(base) < 1e-9);

    // property holds after arbitrary parameter updates
    for (int i = 0; i < 10; ++i) {
        Vec params = rng.normal_vec(attn->lora_dim(), 0.5);
        auto probs = attn->attention(prompt, rng.uniform(), attn->unpack(params));
        REQUIRE(ToyAttention::max_row_sum_error(probs) < 1e-9);
        for (const Mat& p : probs) {
            REQUIRE(p.minCoeff() >= 0.0);
            REQUIRE(p.maxCoeff() <= 1.0);
        }
    }
}

TEST_CASE("attention mass sums the chosen key columns") {
    Mat w(2, 2);
    w << 0.3, 0.7, 0.6, 0.4;
    std::vector<Mat> probs{w};
    REQUIRE(ToyAttention::attention_mass(probs, {1}) == Catch::Approx(1.1));
    REQUIRE(ToyAttention::attention_mass(probs, {}) == 0.0);

    // uniform attention: R rows of S keys, w target columns -> R * w / S
    const int S = 5;
    Mat uniform = Mat::Constant(S, S, 1.0 / S);
    std::vector<Mat> two_heads{uniform, uniform};
    REQUIRE(ToyAttention::attention_mass(two_heads, {1, 3}) ==
            Catch::Approx(2.0 * S * 2.0 / S));

    // zero target columns
    Mat z = Mat::Zero(3, 3);
    z.col(0) = Vec::Ones(3);
    std::vector<Mat> zc{z};
    REQUIRE(ToyAttention::attention_mass(zc, {1, 2}) == 0.0);
}

TEST_CASE("scrambling permutes tokens and remaps the concept positions") {
    AttnVocab vocab;
    SECTION("length one is unchanged") {
        Prompt p;
        p.tokens = {AttnVocab::kTarget};
        p.concept_positions = {0};
        Rng rng(8);
        Prompt s = scramble_tokens(p, rng);
        REQUIRE(s.tokens == p.tokens);
        REQUIRE(s.concept_positions == p.concept_positions);
    }
    SECTION("token multiset preserved, positions track the same tokens") {
        Rng rng(9);
        Prompt p = simple_prompt(vocab);
        p.tokens.push_back(AttnVocab::kTarget);  // two concept positions
        p.concept_positions = {2, 6};
        for (int trial = 0; trial < 50; ++trial) {
            Prompt s = scramble_tokens(p, rng);
            auto a = p.tokens;
            auto b = s.tokens;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            REQUIRE(a == b);
            REQUIRE(s.concept_positions.size() == 2);
            for (std::size_t pos : s.concept_positions)
                REQUIRE(s.tokens[pos] == AttnVocab::kTarget);
        }
    }
}

TEST_CASE("content-only embeddings make the penalty scramble-invariant") {
    auto attn = fresh_attention();
    Prompt p = simple_prompt(attn->vocab());
    Rng rng(10);
    Vec params = rng.normal_vec(attn->lora_dim(), 0.3);
    AttnLora lora = attn->unpack(params);
    const double t = 0.85;
    const double mass = ToyAttention::attention_mass(attn->attention(p, t, lora),
                                                     p.concept_positions);
    for (int trial = 0; trial < 10; ++trial) {
        Prompt s = scramble_tokens(p, rng);
        const double mass_s = ToyAttention::attention_mass(
            attn->attention(s, t, lora), s.concept_positions);
        REQUIRE(mass_s == Catch::Approx(mass).epsilon(1e-12));
    }
}

TEST_CASE("attention gradients match finite differences") {
    auto attn = fresh_attention();
    Prompt prompt = simple_prompt(attn->vocab());
    Rng rng(11);
    const Eigen::Index n = attn->lora_dim();

    SECTION("mass gradient") {
        for (int trial = 0; trial < 5; ++trial) {
            Vec params = rng.normal_vec(n, 0.2);
            const double t = rng.uniform(0.8, 1.0);
            Vec analytic = Vec::Zero(n);
            attn->attention_mass_with_grad(prompt, t, attn->unpack(params),
                                           prompt.concept_positions, analytic);
            Vec numeric = finite_difference_gradient(
                [&](const Vec& p) {
                    return ToyAttention::attention_mass(
                        attn->attention(prompt, t, attn->unpack(p)),
                        prompt.concept_positions);
                },
                params);
            REQUIRE(gradient_relative_error(analytic, numeric) < 1e-5);
        }
    }

    SECTION("feature gradient through normalization and pooling") {
        for (int trial = 0; trial < 5; ++trial) {
            Vec params = rng.normal_vec(n, 0.2);
            const double t = rng.uniform(0.8, 1.0);
            Vec w = rng.normal_vec(attn->sequence_length(prompt));
            Vec analytic = Vec::Zero(n);
            attn->feature_with_grad(prompt, t, attn->unpack(params), w, analytic);
            Vec numeric = finite_difference_gradient(
                [&](const Vec& p) {
                    return w.dot(attn->feature(prompt, t, attn->unpack(p)));
                },
                params);
            REQUIRE(gradient_relative_error(analytic, numeric) < 1e-5);
        }
    }
}

TEST_CASE("reverse contrastive loss identities") {
    Rng rng(12);
    auto unit = [&](Eigen::Index d) {
        Vec v = rng.normal_vec(d);
        return Vec(v / v.norm());
    };

    SECTION("numerator equal to denominator gives zero") {
        ConceptFeatures f;
        f.tau = 0.5;
        f.target = unit(6);
        f.synonym = f.target;
        f.irrelevant = {f.target};  // K = 1, same similarity as the synonym
        REQUIRE(reverse_contrastive_loss(f) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("equal similarities give log K") {
        ConceptFeatures f;
        f.tau = 0.07;
        f.target = unit(6);
        f.synonym = f.target;
        f.irrelevant = {f.target, f.target, f.target};
        REQUIRE(reverse_contrastive_loss(f) ==
                Catch::Approx(std::log(3.0)).margin(1e-9));
    }

    SECTION("unit temperature with sims 1 and 0 gives -1") {
        // sim(target, synonym) = 1, sim(target, irrelevant) = 0
        Vec t(2), syn(2), irr(2);
        t << 1, 0;
        syn << 1, 0;
        irr << 0, 1;
        ConceptFeatures f;
        f.tau = 1.0;
        f.target = t;
        f.synonym = syn;
        f.irrelevant = {irr};
        REQUIRE(reverse_contrastive_loss(f) == Catch::Approx(-1.0));
    }

    SECTION("permutation invariance over the irrelevant set") {
        ConceptFeatures f;
        f.tau = 0.07;
        f.target = unit(8);
        f.synonym = unit(8);
        f.irrelevant = {unit(8), unit(8), unit(8), unit(8)};
        const double base = reverse_contrastive_loss(f);
        std::vector<Vec> shuffled = {f.irrelevant[2], f.irrelevant[0],
                                     f.irrelevant[3], f.irrelevant[1]};
        f.irrelevant = shuffled;
        REQUIRE(reverse_contrastive_loss(f) == Catch::Approx(base).margin(1e-9));
    }

    SECTION("stabilized value equals the naive formula in a safe range") {
        for (int trial = 0; trial < 20; ++trial) {
            ConceptFeatures f;
            f.tau = 0.07;
            f.target = unit(6);
            f.synonym = unit(6);
            f.irrelevant = {unit(6), unit(6), unit(6)};
            double num = 0.0;
            for (const Vec& k : f.irrelevant)
                num += std::exp(f.target.dot(k) / f.tau);
            const double naive = std::log(num / std::exp(f.target.dot(f.synonym) / f.tau));
            REQUIRE(reverse_contrastive_loss(f) == Catch::Approx(naive).margin(1e-9));
        }
    }

    SECTION("huge similarities do not overflow") {
        Vec big(2);
        big << 500.0, 0.0;
        ConceptFeatures f;
        f.tau = 0.07;
        f.target = big;
        f.synonym = big;
        f.irrelevant = {big, big};
        const double v = reverse_contrastive_loss(f);
        REQUIRE(std::isfinite(v));
        REQUIRE(v == Catch::Approx(std::log(2.0)));
    }

    SECTION("gradient with respect to the live feature") {
        for (int trial = 0; trial < 5; ++trial) {
            ConceptFeatures f;
            f.tau = 0.07;
            f.target = unit(6);
            f.synonym = unit(6);
            f.irrelevant = {unit(6), unit(6), unit(6)};
            Vec analytic;
            reverse_contrastive_loss(f, &analytic);
            ConceptFeatures probe = f;
            Vec numeric = finite_difference_gradient(
                [&](const Vec& x) {
                    probe.target = x;
                    return reverse_contrastive_loss(probe);
                },
                f.target);
            REQUIRE(gradient_relative_error(analytic, numeric) < 1e-5);
        }
    }

    SECTION("validation rejects bad bundles") {
        ConceptFeatures f;
        f.tau = 0.0;
        f.target = unit(3);
        f.synonym = unit(3);
        f.irrelevant = {unit(3)};
        REQUIRE_THROWS_AS(reverse_contrastive_loss(f), ConfigError);
        f.tau = 0.1;
        f.irrelevant.clear();
        REQUIRE_THROWS_AS(reverse_contrastive_loss(f), ConfigError);
    }
}
