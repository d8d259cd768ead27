#ifndef SCOREMIX_HEAT_SCORE_HPP
#define SCOREMIX_HEAT_SCORE_HPP

#include <cmath>
#include <numbers>
#include <utility>

#include "measure.hpp"

namespace scoremix {

/// Exponent gap beyond which a softmax term underflows in double precision.
inline constexpr double kSoftmaxCutoff = 745.0;

enum class Regime { moe, cfg };

/// Two datasets, the mixing parameter and the generation horizon.
///
/// lambda in [0, 1] is the mixture-of-experts regime, lambda > 1 the
/// classifier-free-guidance regime.
struct MixedScoreModel {
    EmpiricalMeasure mu1;
    EmpiricalMeasure mu2;
    double lambda = 0.5;
    double T = 1.0;
    double epsilon = 0.0;

    MixedScoreModel() = default;
    MixedScoreModel(EmpiricalMeasure a1, EmpiricalMeasure a2, double lam, double horizon = 1.0, double eps = 0.0)
        : mu1(std::move(a1)), mu2(std::move(a2)), lambda(lam), T(horizon), epsilon(eps) {
        validate();
    }

    void validate() const {
        if (mu1.dim() != mu2.dim()) throw DimensionMismatch(mu1.dim(), mu2.dim());
        if (!(T > 0.0)) throw InvalidArgument("horizon T must be positive");
        if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be nonnegative");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be finite and >= 0");
    }

    std::size_t dim() const { return mu1.dim(); }
    Regime regime() const { return lambda > 1.0 ? Regime::cfg : Regime::moe; }
    bool is_moe() const { return lambda <= 1.0; }
    /// Whether each measure carries a nonzero coefficient in Phi_lambda.
    bool first_active() const { return lambda != 0.0; }
    bool second_active() const { return lambda != 1.0; }

    MixedScoreModel with_lambda(double lam) const {
        MixedScoreModel m = *this;
        m.lambda = lam;
        m.validate();
        return m;
    }
};

namespace detail {

inline void check_time(double t) {
    if (!(t > 0.0)) throw InvalidArgument("time t must be positive");
}

/// Shifted Gaussian-mixture softmax around E_k = ||x - x_k||^2 / (4t).
struct GaussianSoftmax {
    double shift = 0.0;       // min_k E_k
    double log_mass = 0.0;    // log sum_k w_k exp(-(E_k - shift))
    std::size_t nearest = 0;  // argmin_k E_k (lowest index on ties)
    Vec probs;                // p_k; exactly zero past the cutoff

    GaussianSoftmax(const EmpiricalMeasure& mu, const Vec& x, double t) {
        check_time(t);
        const Vec sq = mu.squared_distances(x);
        const Vec e = sq / (4.0 * t);
        Eigen::Index arg = 0;
        shift = e.minCoeff(&arg);
        nearest = static_cast<std::size_t>(arg);
        probs = Vec::Zero(e.size());
        double mass = 0.0;
        for (Eigen::Index k = 0; k < e.size(); ++k) {
            const double gap = e[k] - shift;
            if (gap > kSoftmaxCutoff) continue;
            probs[k] = mu.weights()[k] * std::exp(-gap);
            mass += probs[k];
        }
        probs /= mass;
        log_mass = std::log(mass);
    }

    double log_density(std::size_t d, double t) const {
        return -0.5 * static_cast<double>(d) * std::log(4.0 * std::numbers::pi * t) - shift + log_mass;
    }

    /// sum_k p_k (x_k - anchor)
    Vec offset(const EmpiricalMeasure& mu, const Vec& anchor) const {
        Vec acc = Vec::Zero(static_cast<Eigen::Index>(mu.dim()));
        for (Eigen::Index k = 0; k < probs.size(); ++k) {
            if (probs[k] != 0.0) acc.noalias() += probs[k] * (mu.points().col(k) - anchor);
        }
        return acc;
    }

    /// Barycenter, accumulated relative to the nearest support point.
    Vec barycenter(const EmpiricalMeasure& mu) const {
        const Vec anchor = mu.point(nearest);
        return anchor + offset(mu, anchor);
    }
};

}  // namespace detail

/// log u(x,t) for u = sum_k w_k G_t(x - x_k), G_t the heat kernel (4 pi t)^{-d/2} exp(-|z|^2/4t).
inline double log_heat_density(const EmpiricalMeasure& mu, const Vec& x, double t) {
    return detail::GaussianSoftmax(mu, x, t).log_density(mu.dim(), t);
}

/// Gaussian posterior mean m(x,t) = sum_k p_k(x,t) x_k.
inline Vec barycenter(const EmpiricalMeasure& mu, const Vec& x, double t) {
    return detail::GaussianSoftmax(mu, x, t).barycenter(mu);
}

/// m(x,t) - anchor, accumulated termwise so that it stays accurate when the
/// posterior concentrates on `anchor`.
inline Vec barycenter_offset(const EmpiricalMeasure& mu, const Vec& x, double t, const Vec& anchor) {
    mu.check_dim(anchor);
    return detail::GaussianSoftmax(mu, x, t).offset(mu, anchor);
}

/// Exact heat-flow score grad log u = (m - x) / (2t).
inline Vec score(const EmpiricalMeasure& mu, const Vec& x, double t) {
    return (barycenter(mu, x, t) - x) / (2.0 * t);
}

inline Vec mixed_score(const MixedScoreModel& model, const Vec& x, double t) {
    return model.lambda * score(model.mu1, x, t) + (1.0 - model.lambda) * score(model.mu2, x, t);
}

/// V_lambda = lambda log u1 + (1 - lambda) log u2.
inline double log_product_potential(const MixedScoreModel& model, const Vec& x, double t) {
    return model.lambda * log_heat_density(model.mu1, x, t) + (1.0 - model.lambda) * log_heat_density(model.mu2, x, t);
}

/// F_lambda(x,t) = -4t V_lambda(x,t), assembled from log densities.
inline double rescaled_potential(const MixedScoreModel& model, const Vec& x, double t) {
    detail::check_time(t);
    return -4.0 * t * log_product_potential(model, x, t);
}

/// grad F_lambda = 2 (x - lambda m1 - (1 - lambda) m2).
inline Vec grad_rescaled_potential(const MixedScoreModel& model, const Vec& x, double t) {
    const Vec m1 = barycenter(model.mu1, x, t);
    const Vec m2 = barycenter(model.mu2, x, t);
    return 2.0 * (x - model.lambda * m1 - (1.0 - model.lambda) * m2);
}

/// Every score-side quantity at one (x, t), from a single softmax per measure.
struct ScoreEvaluation {
    double log_u1 = 0.0;
    double log_u2 = 0.0;
    Vec score1;
    Vec score2;
    Vec mixed_score;
    Vec m1;
    Vec m2;
    double F_lambda = 0.0;
    Vec grad_F_lambda;
    double lambda = 0.0;
    double T = 0.0;
    double epsilon = 0.0;
};

inline ScoreEvaluation evaluate_all(const MixedScoreModel& model, const Vec& x, double t) {
    const detail::GaussianSoftmax s1(model.mu1, x, t);
    const detail::GaussianSoftmax s2(model.mu2, x, t);
    const double lam = model.lambda;
    ScoreEvaluation ev;
    ev.log_u1 = s1.log_density(model.dim(), t);
    ev.log_u2 = s2.log_density(model.dim(), t);
    ev.m1 = s1.barycenter(model.mu1);
    ev.m2 = s2.barycenter(model.mu2);
    ev.score1 = (ev.m1 - x) / (2.0 * t);
    ev.score2 = (ev.m2 - x) / (2.0 * t);
    ev.mixed_score = lam * ev.score1 + (1.0 - lam) * ev.score2;
    ev.F_lambda = -4.0 * t * (lam * ev.log_u1 + (1.0 - lam) * ev.log_u2);
    ev.grad_F_lambda = 2.0 * (x - lam * ev.m1 - (1.0 - lam) * ev.m2);
    ev.lambda = lam;
    ev.T = model.T;
    ev.epsilon = model.epsilon;
    return ev;
}

}  // namespace scoremix

#endif  // SCOREMIX_HEAT_SCORE_HPP
