#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace scoremix;
using fixtures::v1;
using datasets::vec2;

namespace {

MixedScoreModel line_model(double lam) { return {datasets::line_first(), datasets::line_second(), lam}; }
MixedScoreModel plane_model(double lam) { return {datasets::plane_first(), datasets::plane_second(), lam}; }

std::vector<double> sorted_first_coords(const std::vector<Vec>& pts) {
    std::vector<double> out;
    for (const auto& p : pts) out.push_back(p[0]);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Geometry, PhiAndInterfaces) {
    const auto m = line_model(0.5);
    EXPECT_DOUBLE_EQ(phi(m, v1(0.5)), 0.5 * 0.25 + 0.5 * 0.25);
    EXPECT_TRUE(nd_indicator(m, v1(1.5)).in_nd1);
    EXPECT_FALSE(nd_indicator(m, v1(1.5)).in_nd2);
    EXPECT_TRUE(nd_indicator(m, v1(0.75)).in_nd2);
    EXPECT_FALSE(nd_indicator(m, v1(0.3)).any());
    const auto pure = line_model(1.0);
    EXPECT_FALSE(on_active_interface(pure, nd_indicator(pure, v1(0.75))));
    EXPECT_TRUE(on_active_interface(pure, nd_indicator(pure, v1(1.5))));
}

TEST(Geometry, SmoothGradientMatchesFiniteDifference) {
    for (double lam : {0.0, 0.4, 1.0, 2.5}) {
        const auto m = plane_model(lam);
        for (const Vec& x : {vec2(0.1, 0.3), vec2(-2.0, 1.0), vec2(3.0, -1.5)}) {
            if (on_active_interface(m, nd_indicator(m, x))) continue;
            const Vec g = grad_phi_smooth(m, x);
            for (Eigen::Index i = 0; i < 2; ++i) {
                Vec xp = x, xm = x;
                xp[i] += 1e-6;
                xm[i] -= 1e-6;
                EXPECT_NEAR(g[i], (phi(m, xp) - phi(m, xm)) / 2e-6, 1e-6);
            }
            EXPECT_NEAR((limiting_field(m, x) + 0.25 * g).norm(), 0.0, 1e-12);
        }
    }
    EXPECT_THROW(grad_phi_smooth(line_model(0.5), v1(1.5)), NonsmoothPoint);
}

TEST(Geometry, ClarkeMatchesLimitingGradientsInMoE) {
    for (double lam : {0.0, 0.3, 0.5, 1.0}) {
        for (const auto& m : {line_model(lam), plane_model(lam)}) {
            const auto dirs = probe_directions(m.dim(), 720);
            const auto ties = fixtures::constructed_ties(m);
            ASSERT_FALSE(ties.empty());
            for (const auto& x : ties) {
                const auto clarke = clarke_subdifferential(m, x, SubgradientKind::clarke);
                const auto outer = clarke_subdifferential(m, x, SubgradientKind::outer_clarke);
                const auto lim = limiting_gradients(m, x, dirs);
                ASSERT_FALSE(lim.empty());
                EXPECT_TRUE(fixtures::hulls_equal(clarke.generators, lim, 1e-9)) << "lambda " << lam << " x " << x.transpose();
                EXPECT_TRUE(fixtures::hulls_equal(clarke.generators, outer.generators, 0.0));
            }
        }
    }
}

TEST(Geometry, OuterHullStrictlyLargerOnSimultaneousCfgInterface) {
    const MixedScoreModel m(EmpiricalMeasure::from_scalars({-1.0, 1.0}), EmpiricalMeasure::from_scalars({-2.0, 2.0}), 2.0);
    const Vec x = v1(0.0);
    EXPECT_THROW(clarke_subdifferential(m, x, SubgradientKind::clarke), OuterHullOnly);
    const auto outer = clarke_subdifferential(m, x, SubgradientKind::outer_clarke);
    const auto lim = limiting_gradients(m, x, probe_directions(1, 2));
    // generators -4 x_k + 2 y_l: {0, 8, -8}; limits along +-1 both give 0
    ASSERT_EQ(lim.size(), 1u);
    EXPECT_DOUBLE_EQ(lim[0][0], 0.0);
    EXPECT_TRUE(fixtures::hull_contains(outer.generators, lim, 0.0));
    EXPECT_FALSE(fixtures::hull_contains(lim, outer.generators, 1e-9));
    // Off the simultaneous interface the Clarke kind is available for lambda > 1.
    EXPECT_NO_THROW(clarke_subdifferential(m, v1(0.5), SubgradientKind::clarke));
}

TEST(Geometry, MinNormSubgradient) {
    const auto m = line_model(0.5);
    // at x = 0.75: A1 nearest 1, A2 tie {0, 1.5}; generators x-1 + x-0 and x-1 + x-1.5
    const auto s = clarke_subdifferential(m, v1(0.75));
    ASSERT_EQ(s.generators.size(), 2u);
    EXPECT_NEAR(s.generators[0][0], 0.5, 1e-15);
    EXPECT_NEAR(s.generators[1][0], -1.0, 1e-15);
    EXPECT_NEAR(min_norm_element(s).norm(), 0.0, 1e-12);
}

TEST(Geometry, ProbeDirectionsAreUnit) {
    for (std::size_t d : {1u, 2u, 3u, 5u}) {
        const auto dirs = probe_directions(d, 64);
        ASSERT_FALSE(dirs.empty());
        for (const auto& h : dirs) EXPECT_NEAR(h.norm(), 1.0, 1e-12);
    }
}

TEST(Geometry, StratumSolutions) {
    const auto m = line_model(0.5);
    const auto s = solve_stratum(m, {{1}, {0}});
    ASSERT_TRUE(s);
    EXPECT_DOUBLE_EQ(s->point[0], 0.5);
    // tie of A1 {1,2} pins x = 1.5
    const auto tie = solve_stratum(m, {{1, 2}, {1}});
    ASSERT_TRUE(tie);
    EXPECT_NEAR(tie->point[0], 1.5, 1e-14);
    // two independent 1D ties cannot hold at once
    EXPECT_FALSE(solve_stratum(m, {{1, 2}, {0, 1}}));
    EXPECT_THROW(solve_stratum(m, {{}, {0}}), InvalidArgument);

    const auto p = plane_model(0.5);
    const auto sol = solve_stratum(p, {{0, 2}, {2}});
    ASSERT_TRUE(sol);
    const Vec x = sol->point;
    EXPECT_NEAR((x - p.mu1.point(0)).squaredNorm(), (x - p.mu1.point(2)).squaredNorm(), 1e-12);
    // stationarity on the bisector: the smooth branch gradient is normal to it
    const Vec g = 2.0 * (x - 0.5 * p.mu1.point(0) - 0.5 * p.mu2.point(2));
    const Vec tangent = vec2(-(p.mu1.point(2) - p.mu1.point(0))[1], (p.mu1.point(2) - p.mu1.point(0))[0]);
    EXPECT_NEAR(g.dot(tangent), 0.0, 1e-12);
}

TEST(Geometry, InStratumIgnoresInactiveMeasure) {
    const auto m = line_model(1.0);
    EXPECT_TRUE(in_stratum(m, v1(1.2), {{1}, {0}}));
    EXPECT_TRUE(in_stratum(m, v1(1.2), {{1}, {1}}));
    EXPECT_FALSE(in_stratum(m, v1(1.2), {{2}, {1}}));
}

TEST(CriticalPoints, PureEndpointsReturnSupports) {
    const auto one = enumerate_critical_points(line_model(1.0));
    EXPECT_EQ(sorted_first_coords(fixtures::minimizer_points(one)), (std::vector<double>{-1.0, 1.0, 2.0}));
    const auto zero = enumerate_critical_points(line_model(0.0));
    EXPECT_EQ(sorted_first_coords(fixtures::minimizer_points(zero)), (std::vector<double>{0.0, 1.5, 5.0}));
    for (const auto& r : zero.minimizers()) EXPECT_EQ(r.classification, CriticalKind::smooth_local_min);
}

TEST(CriticalPoints, OneDimensionalMatchesGridOracle) {
    for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0}) {
        const auto m = line_model(lam);
        const auto res = enumerate_critical_points(m);
        const auto [lo, hi] = default_search_box(m);
        std::vector<Vec> oracle;
        for (double x : fixtures::grid_minima_1d(m, lo[0], hi[0], 1000001)) oracle.push_back(v1(x));
        EXPECT_TRUE(fixtures::same_point_sets(fixtures::minimizer_points(res), oracle, 2e-5)) << "lambda " << lam;
        for (const auto& r : res.records) {
            EXPECT_LE(r.residual, 1e-8);
            EXPECT_NEAR(r.phi_value, phi(m, r.x_star), 1e-12);
        }
    }
}

TEST(CriticalPoints, MixtureRegimeMinimizers) {
    const auto res = enumerate_critical_points(line_model(0.5));
    EXPECT_EQ(sorted_first_coords(fixtures::minimizer_points(res)), (std::vector<double>{-0.5, 0.5, 1.25, 1.75, 3.5}));
    for (const auto& r : res.minimizers()) EXPECT_EQ(r.classification, CriticalKind::smooth_local_min);
}

TEST(CriticalPoints, GuidanceInterfaceMinimizer) {
    const auto res = enumerate_critical_points(line_model(2.0));
    bool found = false;
    for (const auto& r : res.minimizers()) {
        if (std::abs(r.x_star[0] - 0.75) < 1e-12) {
            found = true;
            EXPECT_EQ(r.classification, CriticalKind::interface_point);
            EXPECT_EQ(r.active2, (std::vector<std::size_t>{0, 1}));
        }
    }
    EXPECT_TRUE(found);
}

TEST(CriticalPoints, PlaneMatchesGridOracle) {
    for (double lam : {0.5, 2.5}) {
        const auto m = plane_model(lam);
        const auto res = enumerate_critical_points(m);
        const auto [lo, hi] = default_search_box(m);
        const auto oracle = fixtures::refined_minima_2d(m, lo, hi, 601, 1e-3);
        EXPECT_TRUE(fixtures::same_point_sets(fixtures::minimizer_points(res), oracle, 1e-3)) << "lambda " << lam;
    }
}

TEST(CriticalPoints, PlaneGuidanceStructure) {
    const auto res = enumerate_critical_points(plane_model(2.5));
    std::size_t smooth = 0, interface = 0;
    for (const auto& r : res.minimizers()) {
        smooth += r.classification == CriticalKind::smooth_local_min;
        interface += r.classification == CriticalKind::interface_point;
    }
    EXPECT_EQ(smooth, 1u);
    EXPECT_EQ(interface, 2u);
    const auto moe = plane_model(0.5);
    for (const auto& r : enumerate_critical_points(moe).minimizers()) EXPECT_FALSE(nd_indicator(moe, r.x_star).any());
}

TEST(CriticalPoints, HighDimensionSkipsProbing) {
    const MixedScoreModel m(datasets::gaussian_cloud(5, 6, 1), datasets::gaussian_cloud(5, 6, 2), 0.5);
    const auto res = enumerate_critical_points(m);
    EXPECT_FALSE(res.diagnostics.empty());
    EXPECT_FALSE(res.minimizers().empty());
    for (const auto& r : res.records) EXPECT_LE(r.residual, 1e-8);
}
