#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "gradsurg/rng.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg::toy {

using Vec2 = Eigen::Vector2d;

// Desk-scale conditional velocity field over R^2. The generative world is a
// Gaussian mixture with one component per concept token; a small tanh MLP
// maps (point, token embedding, noise level) to a velocity, and low-rank
// factor pairs on each dense layer play the role of the fine-tuned delta.
// With the delta at zero the adapted field equals the frozen field exactly.

/// Token ids for the conditional field. Token 0 is the null (unconditional)
/// embedding; generative tokens follow.
struct ConceptWorld {
    static constexpr int kNull = 0;
    static constexpr int kTarget = 1;
    static constexpr int kSynonym = 2;

    int k_irrelevant = 3;
    double mode_sigma = 0.12;
    std::vector<Vec2> modes;  // indexed by token id - 1 (target, synonym, irr...)

    explicit ConceptWorld(int k = 3) : k_irrelevant(k) {
        if (k < 1) throw ConfigError("need at least one irrelevant concept");
        const int n = 2 + k;
        const double radius = 1.5;
        modes.reserve(n);
        // target and synonym close together; the first irrelevant concept is
        // a near neighbor of the target (its embedding is entangled too),
        // the rest sit far away
        modes.push_back(radius * Vec2(std::cos(0.0), std::sin(0.0)));
        modes.push_back(radius * Vec2(std::cos(0.45), std::sin(0.45)));
        for (int i = 0; i < k; ++i) {
            const double ang =
                i == 0 ? 0.95 : 1.7 + 3.6 * static_cast<double>(i) / k;
            modes.push_back(radius * Vec2(std::cos(ang), std::sin(ang)));
        }
    }

    int irrelevant_token(int i) const { return 3 + i; }
    int n_tokens() const { return 3 + k_irrelevant; }  // incl. null
    int n_generative() const { return 2 + k_irrelevant; }

    const Vec2& mode_of(int token) const {
        if (token < 1 || token > n_generative())
            throw ConfigError("token has no generative mode");
        return modes[static_cast<std::size_t>(token - 1)];
    }

    Vec2 sample_data(int token, Rng& rng) const {
        const Vec2& m = mode_of(token);
        return m + Vec2(rng.normal(0.0, mode_sigma), rng.normal(0.0, mode_sigma));
    }

    /// Any generative token, uniform; used for null-conditioned training.
    int sample_token(Rng& rng) const {
        return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_generative())));
    }
};

struct FlowArch {
    int embed_dim = 3;
    int hidden = 24;
    int rank = 1;
    int input_dim() const { return 2 + embed_dim + 1; }
};

/// Low-rank delta on the input projection, the layer where conditioning
/// enters the network (fine-tuning targets the conditioning pathway, the
/// deeper layers stay frozen).
struct FlowLora {
    Mat A;  // rank x input_dim
    Mat B;  // hidden x rank
};

namespace detail {

struct FlowCache {
    Vec input, z1, a1, z2, a2;
    Vec2 out;
};

inline Vec pack2(const Mat& a, const Mat& b) {
    Vec v(a.size() + b.size());
    v.head(a.size()) = Eigen::Map<const Vec>(a.data(), a.size());
    v.tail(b.size()) = Eigen::Map<const Vec>(b.data(), b.size());
    return v;
}

}  // namespace detail

class ToyFlowModel {
public:
    ToyFlowModel(const ConceptWorld& world, FlowArch arch, Rng& rng)
        : world_(world), arch_(arch) {
        const int in = arch.input_dim(), h = arch.hidden;
        auto init = [&](Eigen::Index r, Eigen::Index c, double scale) {
            Mat m(r, c);
            for (Eigen::Index i = 0; i < r; ++i)
                for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, scale);
            return m;
        };
        W1_ = init(h, in, 1.0 / std::sqrt(in));
        W2_ = init(h, h, 1.0 / std::sqrt(h));
        W3_ = init(2, h, 1.0 / std::sqrt(h));
        b1_ = Vec::Zero(h);
        b2_ = Vec::Zero(h);
        b3_ = Vec::Zero(2);
        embed_ = init(world.n_tokens(), arch.embed_dim, 1.0);
        entangle(embed_, ConceptWorld::kSynonym, ConceptWorld::kTarget, 0.9);
        entangle(embed_, world.irrelevant_token(0), ConceptWorld::kTarget, 0.95);
    }

    /// Mix a token's embedding toward another's; entangled concepts force a
    /// real erase/preserve trade-off because the network can barely tell
    /// them apart.
    static void entangle(Mat& table, int token, int anchor, double rho) {
        table.row(token) = rho * table.row(anchor) +
                           std::sqrt(1.0 - rho * rho) * table.row(token);
    }

    const ConceptWorld& world() const { return world_; }
    const FlowArch& arch() const { return arch_; }

    Eigen::Index lora_dim() const {
        const int in = arch_.input_dim(), h = arch_.hidden, r = arch_.rank;
        return static_cast<Eigen::Index>(r * in + h * r);
    }

    FlowLora unpack(const Eigen::Ref<const Vec>& flat) const {
        if (flat.size() != lora_dim()) throw ConfigError("bad lora vector size");
        const int in = arch_.input_dim(), h = arch_.hidden, r = arch_.rank;
        FlowLora l;
        l.A = Eigen::Map<const Mat>(flat.data(), r, in);
        l.B = Eigen::Map<const Mat>(flat.data() + r * in, h, r);
        return l;
    }

    Vec zero_lora() const { return Vec::Zero(lora_dim()); }

    /// Training start point: random down-projection, zero up-projection.
    /// The effective delta is still exactly zero, but the factorization is
    /// off its saddle so gradients flow from the first step.
    Vec initial_delta(Rng& rng) const {
        const int in = arch_.input_dim(), h = arch_.hidden, r = arch_.rank;
        Mat a(r, in);
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                a(i, j) = rng.normal(0.0, 1.0 / std::sqrt(in));
        return detail::pack2(a, Mat::Zero(h, r));
    }

    /// Frozen field.
    Vec2 velocity_base(const Vec2& x, int token, double t) const {
        detail::FlowCache c;
        forward(x, token, t, nullptr, c);
        return c.out;
    }

    /// Adapted field v_{theta+delta}.
    Vec2 velocity(const Vec2& x, int token, double t, const FlowLora& lora) const {
        detail::FlowCache c;
        forward(x, token, t, &lora, c);
        return c.out;
    }

    /// Adapted forward pass plus backward of dL/dout into the flat
    /// lora-gradient accumulator.
    Vec2 velocity_with_grad(const Vec2& x, int token, double t,
                            const FlowLora& lora, const Vec2& dout,
                            Vec& lora_grad_acc) const {
        detail::FlowCache c;
        forward(x, token, t, &lora, c);

        Mat dW1;
        backward(c, lora, dout, dW1, nullptr);  // only dW1 needed

        const Mat dA = lora.B.transpose() * dW1;
        const Mat dB = dW1 * lora.A.transpose();
        lora_grad_acc.head(dA.size()) += Eigen::Map<const Vec>(dA.data(), dA.size());
        lora_grad_acc.tail(dB.size()) += Eigen::Map<const Vec>(dB.data(), dB.size());
        return c.out;
    }

    /// One flow-matching pretraining pass: fits the base weights so each
    /// token transports noise to its mode (and the null token to the whole
    /// mixture). Adam, fixed step count, deterministic for a given stream.
    void pretrain(Rng& rng, int steps = 6000, int batch = 64, double lr = 3e-3,
                  double null_fraction = 0.25) {
        Mat mW1 = Mat::Zero(W1_.rows(), W1_.cols()), vW1 = mW1;
        Mat mW2 = Mat::Zero(W2_.rows(), W2_.cols()), vW2 = mW2;
        Mat mW3 = Mat::Zero(W3_.rows(), W3_.cols()), vW3 = mW3;
        Vec mb1 = Vec::Zero(b1_.size()), vb1 = mb1;
        Vec mb2 = Vec::Zero(b2_.size()), vb2 = mb2;
        Vec mb3 = Vec::Zero(b3_.size()), vb3 = mb3;
        const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

        for (int step = 1; step <= steps; ++step) {
            Mat gW1 = Mat::Zero(W1_.rows(), W1_.cols());
            Mat gW2 = Mat::Zero(W2_.rows(), W2_.cols());
            Mat gW3 = Mat::Zero(W3_.rows(), W3_.cols());
            Vec gb1 = Vec::Zero(b1_.size());
            Vec gb2 = Vec::Zero(b2_.size());
            Vec gb3 = Vec::Zero(b3_.size());

            for (int s = 0; s < batch; ++s) {
                const int concept_tok = world_.sample_token(rng);
                const bool null_cond = rng.uniform() < null_fraction;
                const int cond = null_cond ? ConceptWorld::kNull : concept_tok;
                const Vec2 data = world_.sample_data(concept_tok, rng);
                const Vec2 noise(rng.normal(), rng.normal());
                const double t = rng.uniform();
                const Vec2 xt = t * noise + (1.0 - t) * data;
                const Vec2 target = data - noise;

                detail::FlowCache c;
                forward(xt, cond, t, nullptr, c);
                const Vec2 dout = (2.0 / batch) * (c.out - target);
                Mat dW1, dW2, dW3;
                Vec db[3];
                backward(c, std::nullopt, dout, dW1, db, &dW2, &dW3);
                gW1 += dW1;
                gW2 += dW2;
                gW3 += dW3;
                gb1 += db[0];
                gb2 += db[1];
                gb3 += db[2];
            }

            const double corr = std::sqrt(1.0 - std::pow(beta2, step)) /
                                (1.0 - std::pow(beta1, step));
            auto adam = [&](Mat& w, Mat& m, Mat& v, const Mat& g) {
                m = beta1 * m + (1.0 - beta1) * g;
                v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
                w -= lr * corr * m.cwiseQuotient((v.cwiseSqrt().array() + eps).matrix());
            };
            auto adam_v = [&](Vec& w, Vec& m, Vec& v, const Vec& g) {
                m = beta1 * m + (1.0 - beta1) * g;
                v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
                w -= lr * corr * m.cwiseQuotient((v.cwiseSqrt().array() + eps).matrix());
            };
            adam(W1_, mW1, vW1, gW1);
            adam(W2_, mW2, vW2, gW2);
            adam(W3_, mW3, vW3, gW3);
            adam_v(b1_, mb1, vb1, gb1);
            adam_v(b2_, mb2, vb2, gb2);
            adam_v(b3_, mb3, vb3, gb3);
        }
    }

private:
    void forward(const Vec2& x, int token, double t,
                 const FlowLora* lora, detail::FlowCache& c) const {
        if (token < 0 || token >= world_.n_tokens())
            throw ConfigError("unknown token id");
        Vec input(arch_.input_dim());
        input.segment(0, 2) = x;
        input.segment(2, arch_.embed_dim) = embed_.row(token).transpose();
        input[2 + arch_.embed_dim] = t;

        c.input = input;
        c.z1 = W1_ * input + b1_;
        if (lora) c.z1 += lora->B * (lora->A * input);
        c.a1 = c.z1.array().tanh();
        c.z2 = W2_ * c.a1 + b2_;
        c.a2 = c.z2.array().tanh();
        Vec out = W3_ * c.a2 + b3_;
        c.out = Vec2(out[0], out[1]);
    }

    /// Backward for dL/dout, emitting the effective input-layer weight
    /// gradient. The pretraining path additionally wants the full-network
    /// gradients, passed back through the extra pointers.
    void backward(const detail::FlowCache& c, const std::optional<FlowLora>& lora,
                  const Vec2& dout, Mat& dW1, Vec* db, Mat* dW2 = nullptr,
                  Mat* dW3 = nullptr) const {
        (void)lora;  // the delta lives on W1 only; deeper layers are frozen
        const Vec dv = Vec(dout);
        if (dW3) *dW3 = dv * c.a2.transpose();
        Vec da2 = W3_.transpose() * dv;
        Vec dz2 = da2.cwiseProduct((1.0 - c.a2.array().square()).matrix());
        if (dW2) *dW2 = dz2 * c.a1.transpose();
        Vec da1 = W2_.transpose() * dz2;
        Vec dz1 = da1.cwiseProduct((1.0 - c.a1.array().square()).matrix());
        dW1 = dz1 * c.input.transpose();
        if (db) {
            db[0] = dz1;
            db[1] = dz2;
            db[2] = dv;
        }
    }

    ConceptWorld world_;
    FlowArch arch_;
    Mat W1_, W2_, W3_;
    Vec b1_, b2_, b3_;
    Mat embed_;
};

/// Forward-Euler integration of a velocity field from noise level 1 down
/// to 0. Returns nullopt for diverged trajectories.
template <typename Field>
std::optional<Vec2> euler_integrate(const Field& field, Vec2 x, int steps) {
    if (steps < 1) throw ConfigError("sampler needs at least one step");
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = 1.0 - i * h;
        x += h * field(x, t);
        if (x.norm() > 1e6) return std::nullopt;
    }
    return x;
}

/// Sample from the adapted model by integrating its field.
inline std::optional<Vec2> euler_sample(const ToyFlowModel& model,
                                        const FlowLora& lora, const Vec2& x_start,
                                        int token, int steps) {
    return euler_integrate(
        [&](const Vec2& x, double t) { return model.velocity(x, token, t, lora); },
        x_start, steps);
}

/// Fraction of samples within `radius` of a mode center. Diverged samples
/// count as misses; an empty sample set is an error.
inline double concept_accuracy(const std::vector<std::optional<Vec2>>& samples,
                               const Vec2& mode, double radius) {
    if (!(radius > 0.0)) throw ConfigError("accuracy radius must be positive");
    if (samples.empty()) throw ConfigError("no samples to score");
    long hits = 0;
    for (const auto& s : samples)
        if (s.has_value() && (*s - mode).norm() <= radius) ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace gradsurg::toy
