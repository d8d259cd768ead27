#ifndef SCOREMIX_HULL_HPP
#define SCOREMIX_HULL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace scoremix {

using Vec = Eigen::VectorXd;

/// Minimum-norm point of conv(generators) with its convex coefficients.
struct MinNormPoint {
    Vec point;
    Vec coefficients;
    std::size_t iterations = 0;
};

namespace detail {

/// Minimum-norm point of the affine hull of the selected generators;
/// coefficients sum to one but may be negative.
inline Vec affine_min_norm_coefficients(std::span<const Vec> gens, const std::vector<std::size_t>& active) {
    const auto m = active.size();
    Vec beta = Vec::Zero(static_cast<Eigen::Index>(m));
    if (m == 1) {
        beta[0] = 1.0;
        return beta;
    }
    const Vec& g0 = gens[active[0]];
    Eigen::MatrixXd diff(g0.size(), static_cast<Eigen::Index>(m - 1));
    for (std::size_t i = 1; i < m; ++i) diff.col(static_cast<Eigen::Index>(i - 1)) = gens[active[i]] - g0;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(diff);
    cod.setThreshold(1e-12);
    const Vec gamma = cod.solve(-g0);
    beta[0] = 1.0 - gamma.sum();
    beta.tail(static_cast<Eigen::Index>(m - 1)) = gamma;
    return beta;
}

inline Vec combine(std::span<const Vec> gens, const std::vector<std::size_t>& active, const Vec& beta) {
    Vec v = Vec::Zero(gens.front().size());
    for (std::size_t i = 0; i < active.size(); ++i) v.noalias() += beta[static_cast<Eigen::Index>(i)] * gens[active[i]];
    return v;
}

/// Enumerates every face (subset) of a hull with at most a handful of vertices.
inline MinNormPoint min_norm_by_enumeration(std::span<const Vec> gens) {
    const std::size_t n = gens.size();
    MinNormPoint best;
    double best_norm = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::size_t{1} << i)) active.push_back(i);
        }
        const Vec beta = affine_min_norm_coefficients(gens, active);
        if (beta.minCoeff() < -1e-14) continue;
        const Vec v = combine(gens, active, beta);
        const double nv = v.squaredNorm();
        if (nv < best_norm) {
            best_norm = nv;
            best.point = v;
            best.coefficients = Vec::Zero(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < active.size(); ++i)
                best.coefficients[static_cast<Eigen::Index>(active[i])] = std::max(0.0, beta[static_cast<Eigen::Index>(i)]);
        }
    }
    best.coefficients /= best.coefficients.sum();
    return best;
}

}  // namespace detail

/// Minimum-norm point of conv(generators).
///
/// Hulls with at most three generators are solved by enumerating faces.
/// Larger hulls use Wolfe's active-set method: an affinely independent
/// corral is grown by the generator most opposed to the current point and
/// pruned until its affine minimizer has positive coefficients. The method
/// is finite; it stops when no generator improves the point by more than
/// `tol` relative to the squared generator scale.
inline MinNormPoint min_norm_point(std::span<const Vec> gens, double tol = 1e-10, std::size_t max_iter = 100000) {
    if (gens.empty()) throw InvalidArgument("min_norm_point: no generators");
    const auto d = gens.front().size();
    for (const auto& g : gens) {
        if (g.size() != d) throw DimensionMismatch(static_cast<std::size_t>(d), static_cast<std::size_t>(g.size()));
    }
    if (gens.size() <= 3) return detail::min_norm_by_enumeration(gens);

    const std::size_t n = gens.size();
    double scale_sq = 0.0;
    for (const auto& g : gens) scale_sq = std::max(scale_sq, g.squaredNorm());
    const double major_tol = std::max(tol * tol, 1e-14) * std::max(scale_sq, 1.0);
    constexpr double kDrop = 1e-14;

    std::size_t start = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (gens[i].squaredNorm() < gens[start].squaredNorm()) start = i;
    }
    std::vector<std::size_t> corral{start};
    Vec lambda = Vec::Ones(1);
    Vec x = gens[start];

    std::size_t it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        std::size_t j = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double v = gens[i].dot(x);
            if (v < best) {
                best = v;
                j = i;
            }
        }
        if (x.squaredNorm() - best <= major_tol || std::find(corral.begin(), corral.end(), j) != corral.end()) {
            converged = true;
            break;
        }
        corral.push_back(j);
        lambda.conservativeResize(static_cast<Eigen::Index>(corral.size()));
        lambda[lambda.size() - 1] = 0.0;
        for (std::size_t minor = 0;; ++minor) {
            if (minor > n + 1) throw ConvergenceFailure("min_norm_point: minor cycle did not terminate");
            const Vec beta = detail::affine_min_norm_coefficients(gens, corral);
            if (beta.minCoeff() > kDrop) {
                lambda = beta;
                x = detail::combine(gens, corral, lambda);
                break;
            }
            double theta = 1.0;
            for (Eigen::Index i = 0; i < beta.size(); ++i) {
                if (beta[i] <= kDrop && lambda[i] - beta[i] > 0.0) theta = std::min(theta, lambda[i] / (lambda[i] - beta[i]));
            }
            lambda = (1.0 - theta) * lambda + theta * beta;
            std::vector<std::size_t> kept;
            std::vector<double> kept_w;
            for (std::size_t i = 0; i < corral.size(); ++i) {
                if (lambda[static_cast<Eigen::Index>(i)] > kDrop) {
                    kept.push_back(corral[i]);
                    kept_w.push_back(lambda[static_cast<Eigen::Index>(i)]);
                }
            }
            if (kept.empty()) throw ConvergenceFailure("min_norm_point: corral emptied");
            corral = std::move(kept);
            lambda = Eigen::Map<const Vec>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
            lambda /= lambda.sum();
            x = detail::combine(gens, corral, lambda);
        }
    }
    if (!converged) throw ConvergenceFailure("min_norm_point: active-set iteration did not converge");

    MinNormPoint out;
    out.point = x;
    out.coefficients = Vec::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < corral.size(); ++i) out.coefficients[static_cast<Eigen::Index>(corral[i])] = lambda[static_cast<Eigen::Index>(i)];
    out.iterations = it;
    return out;
}

inline Vec min_norm_element(std::span<const Vec> gens, double tol = 1e-10) { return min_norm_point(gens, tol).point; }

/// dist(x, conv(points)) via the minimum-norm point of conv(points - x).
inline double distance_to_hull(std::span<const Vec> points, const Vec& x) {
    std::vector<Vec> shifted;
    shifted.reserve(points.size());
    for (const auto& p : points) shifted.push_back(p - x);
    return min_norm_point(shifted).point.norm();
}

}  // namespace scoremix

#endif  // SCOREMIX_HULL_HPP
