#ifndef SCOREMIX_GEOMETRY_HPP
#define SCOREMIX_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <numbers>
#include <optional>
#include <set>
#include <vector>

#include "heat_score.hpp"
#include "hull.hpp"

namespace scoremix {

/// Phi_lambda(x) = lambda d1(x)^2 + (1 - lambda) d2(x)^2.
inline double phi(const MixedScoreModel& model, const Vec& x) {
    return model.lambda * distance_squared(model.mu1, x) + (1.0 - model.lambda) * distance_squared(model.mu2, x);
}

struct NdIndicator {
    bool in_nd1 = false;
    bool in_nd2 = false;
    bool any() const { return in_nd1 || in_nd2; }
    bool both() const { return in_nd1 && in_nd2; }
};

/// Membership in the Voronoi interfaces of A1 and A2 (non-unique nearest points).
inline NdIndicator nd_indicator(const MixedScoreModel& model, const Vec& x, double tie_tol = kDefaultTieTol) {
    return {!nearest_set(model.mu1, x, tie_tol).is_unique, !nearest_set(model.mu2, x, tie_tol).is_unique};
}

/// Whether x lies on the part of the interface that matters for Phi_lambda:
/// at lambda = 1 (resp. 0) only the ties of A1 (resp. A2) count.
inline bool on_active_interface(const MixedScoreModel& model, const NdIndicator& nd) {
    return (model.first_active() && nd.in_nd1) || (model.second_active() && nd.in_nd2);
}

enum class SubgradientKind { clarke, outer_clarke };

/// conv(generators); the generator list is kept without exact duplicates.
struct SubgradientSet {
    std::vector<Vec> generators;
    SubgradientKind kind = SubgradientKind::outer_clarke;
    std::vector<std::size_t> active1;
    std::vector<std::size_t> active2;
};

/// 2 lambda (x - x_k) + 2 (1 - lambda)(x - y_l) over (k, l) in I x J, in
/// lexicographic pair order.
inline std::vector<Vec> pair_generators(const MixedScoreModel& model, const Vec& x, const std::vector<std::size_t>& I,
                                        const std::vector<std::size_t>& J) {
    std::vector<Vec> gens;
    const double lam = model.lambda;
    for (auto k : I) {
        for (auto l : J) {
            Vec g = 2.0 * lam * (x - model.mu1.point(k)) + 2.0 * (1.0 - lam) * (x - model.mu2.point(l));
            const bool dup = std::any_of(gens.begin(), gens.end(), [&](const Vec& h) { return h == g; });
            if (!dup) gens.push_back(std::move(g));
        }
    }
    return gens;
}

/// Clarke or outer Clarke subdifferential of Phi_lambda at x.
///
/// Both are conv{2 lambda (x - x_k) + 2 (1 - lambda)(x - y_l)} over the
/// nearest index sets. They coincide for lambda in [0, 1] and, for
/// lambda > 1, off the simultaneous interface ND(d1^2) cap ND(d2^2); there
/// only the outer hull is available and requesting the Clarke kind throws.
inline SubgradientSet clarke_subdifferential(const MixedScoreModel& model, const Vec& x,
                                             SubgradientKind kind = SubgradientKind::clarke,
                                             double tie_tol = kDefaultTieTol) {
    const auto n1 = nearest_set(model.mu1, x, tie_tol);
    const auto n2 = nearest_set(model.mu2, x, tie_tol);
    if (kind == SubgradientKind::clarke && model.lambda > 1.0 && !n1.is_unique && !n2.is_unique)
        throw OuterHullOnly("Clarke subdifferential on the simultaneous interface with lambda > 1: only the outer hull is available");
    SubgradientSet s;
    s.kind = kind;
    s.active1 = n1.indices;
    s.active2 = n2.indices;
    s.generators = pair_generators(model, x, n1.indices, n2.indices);
    return s;
}

inline MinNormPoint min_norm_point(const SubgradientSet& s, double tol = 1e-10) { return min_norm_point(s.generators, tol); }
inline Vec min_norm_element(const SubgradientSet& s, double tol = 1e-10) { return min_norm_point(s.generators, tol).point; }

/// Gradients of Phi_lambda at x obtained as limits along rays x + delta h,
/// delta -> 0+, for the given directions. Taken straight from the sequential
/// definition of the Clarke subdifferential, independently of the pair
/// formula: along h the surviving nearest point is the tied one maximizing
/// <h, a>; directions that leave a tie among the maximizers are skipped.
inline std::vector<Vec> limiting_gradients(const MixedScoreModel& model, const Vec& x, const std::vector<Vec>& directions,
                                           double tie_tol = kDefaultTieTol) {
    const auto n1 = nearest_set(model.mu1, x, tie_tol);
    const auto n2 = nearest_set(model.mu2, x, tie_tol);
    auto survivor = [](const EmpiricalMeasure& mu, const std::vector<std::size_t>& idx, const Vec& h) -> std::optional<std::size_t> {
        std::size_t best = idx.front();
        double best_val = h.dot(mu.point(best));
        bool tied = false;
        for (std::size_t i = 1; i < idx.size(); ++i) {
            const double v = h.dot(mu.point(idx[i]));
            const double scale = 1e-12 * (1.0 + std::abs(v) + std::abs(best_val));
            if (v > best_val + scale) {
                best = idx[i];
                best_val = v;
                tied = false;
            } else if (std::abs(v - best_val) <= scale) {
                tied = true;
            }
        }
        if (tied) return std::nullopt;
        return best;
    };
    std::vector<Vec> out;
    for (const auto& h : directions) {
        const auto k = survivor(model.mu1, n1.indices, h);
        const auto l = survivor(model.mu2, n2.indices, h);
        if (!k || !l) continue;
        Vec g = 2.0 * model.lambda * (x - model.mu1.point(*k)) + 2.0 * (1.0 - model.lambda) * (x - model.mu2.point(*l));
        if (std::none_of(out.begin(), out.end(), [&](const Vec& q) { return q == g; })) out.push_back(std::move(g));
    }
    return out;
}

/// Unit directions: both signs in 1D, a uniform circle in 2D, a Fibonacci
/// sphere in 3D, and coordinate axes plus a fixed pseudo-random cloud beyond.
inline std::vector<Vec> probe_directions(std::size_t d, std::size_t count) {
    std::vector<Vec> dirs;
    if (d == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
        return dirs;
    }
    if (d == 2) {
        for (std::size_t i = 0; i < count; ++i) {
            const double a = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
            Vec h(2);
            h << std::cos(a), std::sin(a);
            dirs.push_back(h);
        }
        return dirs;
    }
    if (d == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (std::size_t i = 0; i < count; ++i) {
            const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(1.0 - z * z);
            Vec h(3);
            h << r * std::cos(golden * static_cast<double>(i)), r * std::sin(golden * static_cast<double>(i)), z;
            dirs.push_back(h);
        }
        return dirs;
    }
    for (std::size_t i = 0; i < d; ++i) {
        dirs.push_back(Vec::Unit(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)));
        dirs.push_back(-Vec::Unit(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)));
    }
    // Weyl sequence pushed through a Box-Muller-free map: deterministic and
    // well spread enough for probing.
    for (std::size_t i = 0; i < count; ++i) {
        Vec h(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) {
            const double u = std::fmod(static_cast<double>(i + 1) * std::sqrt(static_cast<double>(2 + 3 * j)) + 0.5 * static_cast<double>(j), 1.0);
            h[static_cast<Eigen::Index>(j)] = std::tan(std::numbers::pi * (u - 0.5) * 0.9);
        }
        dirs.push_back(h.normalized());
    }
    return dirs;
}

/// grad Phi_lambda = 2 (x - lambda a1 - (1 - lambda) a2) at a differentiability point.
inline Vec grad_phi_smooth(const MixedScoreModel& model, const Vec& x, double tie_tol = kDefaultTieTol) {
    const auto n1 = nearest_set(model.mu1, x, tie_tol);
    const auto n2 = nearest_set(model.mu2, x, tie_tol);
    if ((model.first_active() && !n1.is_unique) || (model.second_active() && !n2.is_unique))
        throw NonsmoothPoint("grad_phi_smooth: x lies on ND(A1, A2)");
    return 2.0 * (x - model.lambda * model.mu1.point(n1.indices.front()) -
                  (1.0 - model.lambda) * model.mu2.point(n2.indices.front()));
}

/// Selection of -1/4 grad Phi_lambda with ties broken by lowest index.
inline Vec limiting_field(const MixedScoreModel& model, const Vec& x) {
    const Vec s1 = model.mu1.squared_distances(x);
    const Vec s2 = model.mu2.squared_distances(x);
    Eigen::Index k = 0;
    Eigen::Index l = 0;
    s1.minCoeff(&k);
    s2.minCoeff(&l);
    return -0.5 * (x - model.lambda * model.mu1.points().col(k) - (1.0 - model.lambda) * model.mu2.points().col(l));
}

/// Nearest-index sets (I, J) labelling a stratum Sigma_{I,J}.
struct StratumKey {
    std::vector<std::size_t> I;
    std::vector<std::size_t> J;
    auto operator<=>(const StratumKey&) const = default;
    bool operator==(const StratumKey&) const = default;
};

inline StratumKey stratum_of(const MixedScoreModel& model, const Vec& x, double tie_tol = kDefaultTieTol) {
    return {nearest_set(model.mu1, x, tie_tol).indices, nearest_set(model.mu2, x, tie_tol).indices};
}

/// Stratum membership, ignoring the index set of a measure whose
/// coefficient in Phi_lambda vanishes.
inline bool in_stratum(const MixedScoreModel& model, const Vec& x, const StratumKey& key, double tie_tol = kDefaultTieTol) {
    const auto s = stratum_of(model, x, tie_tol);
    return (!model.first_active() || s.I == key.I) && (!model.second_active() || s.J == key.J);
}

struct StratumSolution {
    Vec point;
    double constraint_residual = 0.0;
    Eigen::Index rank = 0;
};

/// Unique critical point of q_{I,J} on the affine hull M_{I,J}.
///
/// Every active branch lambda |x - x_k|^2 + (1 - lambda)|x - y_l|^2 equals
/// |x - c|^2 + const with c = lambda x_k + (1 - lambda) y_l, so the critical
/// point is the orthogonal projection of c onto M_{I,J}, the solution set of
/// the affine equal-distance equations. Returns nullopt when that system is
/// inconsistent (empty M).
inline std::optional<StratumSolution> solve_stratum(const MixedScoreModel& model, const StratumKey& key,
                                                    double rank_tol = 1e-10) {
    if (key.I.empty() || key.J.empty()) throw InvalidArgument("stratum index sets must be nonempty");
    const auto d = static_cast<Eigen::Index>(model.dim());
    const bool use1 = model.first_active();
    const bool use2 = model.second_active();
    const Eigen::Index rows = (use1 ? static_cast<Eigen::Index>(key.I.size()) - 1 : 0) +
                              (use2 ? static_cast<Eigen::Index>(key.J.size()) - 1 : 0);
    const Vec c = model.lambda * model.mu1.point(key.I.front()) + (1.0 - model.lambda) * model.mu2.point(key.J.front());
    StratumSolution sol;
    if (rows == 0) {
        sol.point = c;
        return sol;
    }
    Eigen::MatrixXd B(rows, d);
    Vec r(rows);
    Eigen::Index row = 0;
    auto add = [&](const EmpiricalMeasure& mu, const std::vector<std::size_t>& idx) {
        for (std::size_t i = 1; i < idx.size(); ++i) {
            // |x - p|^2 = |x - q|^2  <=>  2 (q - p) . x = |q|^2 - |p|^2
            B.row(row) = 2.0 * (mu.point(idx[i]) - mu.point(idx[0])).transpose();
            r[row] = mu.squared_norms()[static_cast<Eigen::Index>(idx[i])] - mu.squared_norms()[static_cast<Eigen::Index>(idx[0])];
            ++row;
        }
    };
    if (use1) add(model.mu1, key.I);
    if (use2) add(model.mu2, key.J);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(B);
    cod.setThreshold(rank_tol);
    sol.point = c + cod.solve(r - B * c);
    sol.rank = cod.rank();
    const double scale = 1.0 + r.cwiseAbs().maxCoeff() + B.cwiseAbs().maxCoeff() * sol.point.cwiseAbs().maxCoeff();
    sol.constraint_residual = (B * sol.point - r).cwiseAbs().maxCoeff() / scale;
    if (sol.constraint_residual > 1e-9) return std::nullopt;
    return sol;
}

}  // namespace scoremix

#endif  // SCOREMIX_GEOMETRY_HPP
