#pragma once

#include <memory>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gradsurg/objective.hpp"
#include "gradsurg/rng.hpp"
#include "gradsurg/vec.hpp"

namespace gradsurg {

/// Convex test bed: L_i(x) = (x - c_i)' A_i (x - c_i) / 2 with symmetric
/// positive-definite curvatures. Gradients are analytic and the composite
/// minimum has a closed form, which the convergence-rate checks rely on.
class QuadraticPair final : public TwoObjective {
public:
    QuadraticPair(Vec center_e, Mat curv_e, Vec center_p, Mat curv_p)
        : ce_(std::move(center_e)), Ae_(std::move(curv_e)),
          cp_(std::move(center_p)), Ap_(std::move(curv_p)) {
        if (ce_.size() != cp_.size()) throw ConfigError("center dims differ");
        check_spd(Ae_, "erasure curvature");
        check_spd(Ap_, "preservation curvature");
    }

    Eigen::Index dim() const override { return ce_.size(); }

    double value_e(const Vec& x) const override {
        return 0.5 * (x - ce_).dot(Ae_ * (x - ce_));
    }
    double value_p(const Vec& x) const override {
        return 0.5 * (x - cp_).dot(Ap_ * (x - cp_));
    }
    Vec gradient_e(const Vec& x) const override { return Ae_ * (x - ce_); }
    Vec gradient_p(const Vec& x) const override { return Ap_ * (x - cp_); }

    /// argmin of L_e + lambda L_p: (A_e + lambda A_p)^-1 (A_e c_e + lambda A_p c_p).
    Vec composite_argmin(double lambda) const {
        Mat A = Ae_ + lambda * Ap_;
        Vec b = Ae_ * ce_ + lambda * (Ap_ * cp_);
        return A.ldlt().solve(b);
    }

    double composite_min(double lambda) const {
        Vec x = composite_argmin(lambda);
        return value_e(x) + lambda * value_p(x);
    }

    /// Largest eigenvalue of either curvature, the exact smoothness constant.
    double smoothness() const {
        Eigen::SelfAdjointEigenSolver<Mat> se(Ae_), sp(Ap_);
        return std::max(se.eigenvalues().maxCoeff(), sp.eigenvalues().maxCoeff());
    }

    const Vec& center_e() const { return ce_; }
    const Vec& center_p() const { return cp_; }

    // Two centers on opposite sides of the origin, axis-aligned anisotropic
    // curvatures. Gradients conflict along the whole segment between the
    // centers.
    static std::shared_ptr<QuadraticPair> conflicting(Eigen::Index d = 2) {
        if (d < 1) throw ConfigError("dimension must be >= 1");
        Vec ce = Vec::Zero(d), cp = Vec::Zero(d);
        ce[0] = 1.0;
        cp[0] = -1.0;
        if (d > 1) cp[1] = 0.5;
        Vec de = Vec::Ones(d), dp = Vec::Ones(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            de[i] = 1.0 + 0.5 * static_cast<double>(i % 3);
            dp[i] = 2.0 - 0.4 * static_cast<double>(i % 3);
        }
        return std::make_shared<QuadraticPair>(ce, Mat(de.asDiagonal()), cp,
                                               Mat(dp.asDiagonal()));
    }

    /// Seeded random SPD pair with conflicting centers.
    static std::shared_ptr<QuadraticPair> random(Eigen::Index d, Rng& rng) {
        auto spd = [&](double scale) {
            Mat m(d, d);
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
            Mat a = scale * (m.transpose() * m) / static_cast<double>(d);
            a += 0.2 * Mat::Identity(d, d);
            return a;
        };
        Vec ce = rng.normal_vec(d), cp = rng.normal_vec(d);
        if ((ce - cp).norm() < 0.5) cp.array() += 1.0;  // keep the centers apart
        return std::make_shared<QuadraticPair>(ce, spd(1.0), cp, spd(1.0));
    }

private:
    static void check_spd(const Mat& a, const std::string& what) {
        if (a.rows() != a.cols()) throw ConfigError(what + ": not square");
        if (!a.isApprox(a.transpose(), 1e-12))
            throw ConfigError(what + ": not symmetric");
        Eigen::LLT<Mat> llt(a);
        if (llt.info() != Eigen::Success)
            throw ConfigError(what + ": not positive definite");
    }

    Vec ce_;
    Mat Ae_;
    Vec cp_;
    Mat Ap_;
};

/// One-dimensional pair L_e = x^2/2, L_p = (x-1)^2/2: total gradient
/// conflict on (0, 1), handy for deadlock demonstrations.
inline std::shared_ptr<QuadraticPair> scalar_conflict_pair() {
    Vec ce(1), cp(1);
    ce << 0.0;
    cp << 1.0;
    Mat one = Mat::Identity(1, 1);
    return std::make_shared<QuadraticPair>(ce, one, cp, one);
}

}  // namespace gradsurg
