#ifndef SCOREMIX_TESTS_FIXTURES_HPP
#define SCOREMIX_TESTS_FIXTURES_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <scoremix/scoremix.hpp>

namespace fixtures {

using scoremix::EmpiricalMeasure;
using scoremix::MixedScoreModel;
using scoremix::Vec;

inline Vec v1(double a) { return Vec::Constant(1, a); }

/// Points on Voronoi interfaces of either measure: pair bisectors (with
/// offsets along the bisector in 2D), circumcenters of triples, and
/// crossings of an A1 bisector with an A2 bisector. Only genuine ties are kept.
inline std::vector<Vec> constructed_ties(const MixedScoreModel& model) {
    std::vector<Vec> cand;
    const auto d = model.dim();
    auto bisectors = [&](const EmpiricalMeasure& mu) {
        for (std::size_t a = 0; a < mu.size(); ++a) {
            for (std::size_t b = a + 1; b < mu.size(); ++b) {
                const Vec mid = 0.5 * (mu.point(a) + mu.point(b));
                cand.push_back(mid);
                if (d == 2) {
                    const Vec n = mu.point(b) - mu.point(a);
                    const Vec perp = scoremix::datasets::vec2(-n[1], n[0]);
                    for (double s : {-1.5, -0.7, -0.2, 0.3, 0.9, 2.0}) cand.push_back(mid + s * perp);
                }
            }
        }
        if (d == 2) {
            for (std::size_t a = 0; a < mu.size(); ++a)
                for (std::size_t b = a + 1; b < mu.size(); ++b)
                    for (std::size_t c = b + 1; c < mu.size(); ++c) {
                        Eigen::Matrix2d A;
                        A.row(0) = 2.0 * (mu.point(b) - mu.point(a)).transpose();
                        A.row(1) = 2.0 * (mu.point(c) - mu.point(a)).transpose();
                        if (std::abs(A.determinant()) < 1e-12) continue;
                        Eigen::Vector2d r(mu.squared_norms()[b] - mu.squared_norms()[a], mu.squared_norms()[c] - mu.squared_norms()[a]);
                        cand.push_back(A.fullPivLu().solve(r));
                    }
        }
    };
    bisectors(model.mu1);
    bisectors(model.mu2);
    if (d == 2) {
        for (std::size_t a = 0; a < model.mu1.size(); ++a)
            for (std::size_t b = a + 1; b < model.mu1.size(); ++b)
                for (std::size_t c = 0; c < model.mu2.size(); ++c)
                    for (std::size_t e = c + 1; e < model.mu2.size(); ++e) {
                        Eigen::Matrix2d A;
                        A.row(0) = 2.0 * (model.mu1.point(b) - model.mu1.point(a)).transpose();
                        A.row(1) = 2.0 * (model.mu2.point(e) - model.mu2.point(c)).transpose();
                        if (std::abs(A.determinant()) < 1e-12) continue;
                        Eigen::Vector2d r(model.mu1.squared_norms()[b] - model.mu1.squared_norms()[a],
                                          model.mu2.squared_norms()[e] - model.mu2.squared_norms()[c]);
                        cand.push_back(A.fullPivLu().solve(r));
                    }
    }
    std::vector<Vec> out;
    for (const auto& x : cand) {
        if (scoremix::nd_indicator(model, x).any()) out.push_back(x);
    }
    return out;
}

/// Whether every point of `a` lies within tol of conv(b).
inline bool hull_contains(const std::vector<Vec>& b, const std::vector<Vec>& a, double tol) {
    return std::all_of(a.begin(), a.end(), [&](const Vec& p) { return scoremix::distance_to_hull(b, p) <= tol; });
}

inline bool hulls_equal(const std::vector<Vec>& a, const std::vector<Vec>& b, double tol) {
    return hull_contains(a, b, tol) && hull_contains(b, a, tol);
}

/// Strict discrete local minima of Phi_lambda on a uniform 1D grid.
inline std::vector<double> grid_minima_1d(const MixedScoreModel& model, double lo, double hi, std::size_t n) {
    std::vector<double> vals(n);
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) vals[i] = scoremix::phi(model, v1(lo + h * static_cast<double>(i)));
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (vals[i] < vals[i - 1] && vals[i] <= vals[i + 1]) out.push_back(lo + h * static_cast<double>(i));
    }
    return out;
}

/// Discrete local minima of Phi_lambda on an n x n grid (8-neighbourhood).
inline std::vector<Vec> grid_minima_2d(const MixedScoreModel& model, const Vec& lo, const Vec& hi, std::size_t n) {
    std::vector<double> vals(n * n);
    const Vec h = (hi - lo) / static_cast<double>(n - 1);
    auto at = [&](std::size_t i, std::size_t j) {
        return scoremix::datasets::vec2(lo[0] + h[0] * static_cast<double>(i), lo[1] + h[1] * static_cast<double>(j));
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) vals[i * n + j] = scoremix::phi(model, at(i, j));
    std::vector<Vec> out;
    for (std::size_t i = 1; i + 1 < n; ++i)
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double v = vals[i * n + j];
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const double w = vals[(i + di) * n + (j + dj)];
                    const bool earlier = di < 0 || (di == 0 && dj < 0);
                    if (earlier ? w <= v : w < v) {
                        is_min = false;
                        break;
                    }
                }
            if (is_min) out.push_back(at(i, j));
        }
    return out;
}

/// Polishes a grid minimum by compass search over a fine set of directions, halving the step on failure.
inline Vec refine_minimum_2d(const MixedScoreModel& model, Vec x, double radius) {
    constexpr int n_dirs = 3600;
    double val = scoremix::phi(model, x);
    for (int iter = 0; iter < 100000 && radius > 1e-11; ++iter) {
        Vec best = x;
        double best_val = val;
        for (int k = 0; k < n_dirs; ++k) {
            const double a = 2.0 * std::numbers::pi * k / n_dirs;
            const Vec y = x + radius * scoremix::datasets::vec2(std::cos(a), std::sin(a));
            const double v = scoremix::phi(model, y);
            if (v < best_val) {
                best_val = v;
                best = y;
            }
        }
        if (best_val < val) {
            x = best;
            val = best_val;
        } else {
            radius /= 2.0;
        }
    }
    return x;
}

/// Grid minima refined to true local minima and merged within tol.
inline std::vector<Vec> refined_minima_2d(const MixedScoreModel& model, const Vec& lo, const Vec& hi, std::size_t n, double tol) {
    const double radius = 2.0 * ((hi - lo) / static_cast<double>(n - 1)).maxCoeff();
    std::vector<Vec> out;
    for (const auto& g : grid_minima_2d(model, lo, hi, n)) {
        const Vec x = refine_minimum_2d(model, g, radius);
        if (std::none_of(out.begin(), out.end(), [&](const Vec& y) { return (x - y).norm() <= tol; })) out.push_back(x);
    }
    return out;
}

/// Every point of `a` has a partner in `b` within tol and vice versa.
inline bool same_point_sets(const std::vector<Vec>& a, const std::vector<Vec>& b, double tol) {
    auto covered = [&](const std::vector<Vec>& p, const std::vector<Vec>& q) {
        return std::all_of(p.begin(), p.end(), [&](const Vec& x) {
            return std::any_of(q.begin(), q.end(), [&](const Vec& y) { return (x - y).norm() <= tol; });
        });
    };
    return a.size() == b.size() && covered(a, b) && covered(b, a);
}

inline std::vector<Vec> minimizer_points(const scoremix::EnumerationResult& res) {
    std::vector<Vec> out;
    for (const auto& r : res.minimizers()) out.push_back(r.x_star);
    return out;
}

}  // namespace fixtures

#endif  // SCOREMIX_TESTS_FIXTURES_HPP
