#include <cmath>
#include <cstdlib>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace scoremix;
using fixtures::v1;
using datasets::vec2;

namespace {

MixedScoreModel line_model(double lam, double eps = 0.0) { return {datasets::line_first(), datasets::line_second(), lam, 1.0, eps}; }

MixedScoreModel dirac_model(const Vec& a, double eps = 0.0) { return {datasets::dirac(a), datasets::dirac(a), 1.0, 1.0, eps}; }

IntegratorConfig config(double dtau, double tau_max, std::uint64_t seed = 0) {
    IntegratorConfig c;
    c.dtau = dtau;
    c.tau_max = tau_max;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Dynamics, ConfigValidation) {
    EXPECT_THROW(config(0.0, 1.0).validate(), InvalidArgument);
    EXPECT_THROW(config(1e-2, -1.0).validate(), InvalidArgument);
    EXPECT_THROW(IntegratorConfig::for_horizon(1.0, 2.0), InvalidArgument);
    EXPECT_NEAR(IntegratorConfig::for_horizon(1.0, 1e-4).tau_max, std::log(1e4), 1e-15);
    EXPECT_EQ(config(1e-2, 9.2).steps(), 920u);
    EXPECT_THROW(simulate_similarity_ode(line_model(0.5), Vec::Zero(2)), DimensionMismatch);
}

TEST(Dynamics, DiracEulerMatchesDiscreteRecursion) {
    const Vec a = vec2(0.5, -1.0);
    const auto m = dirac_model(a);
    const Vec x = vec2(3.0, 2.0);
    const auto tr = simulate_similarity_ode(m, x, config(1e-2, 5.0));
    ASSERT_EQ(tr.size(), 501u);
    // grad F = 2 (y - a), so each Euler step contracts y - a by 1 - h/2
    const Vec expect = a + (x - a) * std::pow(1.0 - 0.5e-2, 500);
    EXPECT_NEAR((tr.terminal() - expect).norm(), 0.0, 1e-12);
    EXPECT_NEAR((tr.terminal() - (a + (x - a) * std::exp(-2.5))).norm(), 0.0, 5e-3);
}

TEST(Dynamics, Rk4MatchesContinuousSolution) {
    const Vec a = v1(1.0);
    const auto m = dirac_model(a);
    auto cfg = config(1e-2, 5.0);
    cfg.method = StepMethod::rk4;
    const auto tr = simulate_similarity_ode(m, v1(4.0), cfg);
    EXPECT_NEAR(tr.terminal()[0], 1.0 + 3.0 * std::exp(-2.5), 1e-9);
}

TEST(Dynamics, ZeroNoiseSdeEqualsOde) {
    const auto m = line_model(2.0);
    const auto cfg = config(1e-2, 9.2, 7);
    const auto ode = simulate_similarity_ode(m, v1(0.9), cfg);
    const auto sde = simulate_similarity_sde(m, v1(0.9), cfg);
    ASSERT_EQ(ode.size(), sde.size());
    for (std::size_t i = 0; i < ode.size(); ++i) EXPECT_EQ(ode.states[i], sde.states[i]);
}

TEST(Dynamics, PhysicalMatchesSimilarityTime) {
    for (double lam : {0.5, 2.0}) {
        const auto m = line_model(lam);
        const double t_min = 1e-4;
        const std::size_t n = 921;
        const auto phys = simulate_physical_ode(m, v1(0.9), t_min, n);
        const auto sim = simulate_similarity_ode(m, v1(0.9), config(std::log(1.0 / t_min) / n, std::log(1.0 / t_min)));
        ASSERT_EQ(phys.size(), sim.size());
        EXPECT_NEAR(phys.terminal()[0], sim.terminal()[0], 1e-8);
        EXPECT_NEAR(phys.times.back(), t_min, 1e-15);
        EXPECT_NEAR(phys.tau_at(phys.size() - 1), std::log(1.0 / t_min), 1e-12);
    }
}

TEST(Dynamics, PhysicalStepCountEdgeCases) {
    const auto m = line_model(0.5);
    EXPECT_THROW(simulate_physical_ode(m, v1(0.0), 1e-4, 0), InvalidArgument);
    const auto one = simulate_physical_ode(m, v1(0.0), 1e-4, 1);
    EXPECT_EQ(one.size(), 2u);
    EXPECT_EQ(one.warnings.size(), 1u);
    EXPECT_THROW(simulate_physical_ode(m, v1(0.0), 2.0, 10), InvalidArgument);
}

TEST(Dynamics, CfgOdeReachesInterfacePoint) {
    const auto tr = simulate_similarity_ode(line_model(2.0), v1(0.9), config(1e-2, 9.2));
    EXPECT_NEAR(tr.terminal()[0], 0.75, 1e-2);
}

TEST(Dynamics, SdeReproducibleAndSeedSensitive) {
    const auto m = line_model(0.5, 0.2);
    const auto a = simulate_similarity_sde(m, v1(0.3), config(1e-2, 9.2, 11));
    const auto b = simulate_similarity_sde(m, v1(0.3), config(1e-2, 9.2, 11));
    const auto c = simulate_similarity_sde(m, v1(0.3), config(1e-2, 9.2, 12));
    EXPECT_EQ(a.states, b.states);
    EXPECT_NE(a.terminal()[0], c.terminal()[0]);
}

TEST(Dynamics, SdeDiracMomentsMatchRecursion) {
    const double eps = 0.5;
    const Vec a = v1(2.0);
    const auto m = dirac_model(a, eps);
    const auto cfg = config(1e-2, 3.0, 100);
    SamplerSpec start;
    start.kind = SamplerKind::file;
    const std::size_t n = 4000;
    start.points.assign(n, v1(-1.0));
    const auto paths = ensemble(m, start, n, cfg);
    // linear recursion: mean contracts by r, variance by r^2 plus amp^2
    const double h = cfg.dtau;
    const double r = 1.0 - 0.5 * (1.0 + eps) * h;
    double mean = -1.0 - 2.0, var = 0.0;
    for (std::size_t i = 0; i < cfg.steps(); ++i) {
        const double amp = std::sqrt(2.0 * eps * m.T) * std::exp(-0.5 * h * static_cast<double>(i)) * std::sqrt(h);
        mean *= r;
        var = r * r * var + amp * amp;
    }
    double s = 0, s2 = 0;
    for (const auto& p : paths) {
        s += p.terminal()[0] - 2.0;
        s2 += (p.terminal()[0] - 2.0) * (p.terminal()[0] - 2.0);
    }
    const double emp_mean = s / n;
    const double emp_var = s2 / n - emp_mean * emp_mean;
    EXPECT_NEAR(emp_mean, mean, 5.0 * std::sqrt(var / n));
    EXPECT_NEAR(emp_var, var, 5.0 * var * std::sqrt(2.0 / n));
}

TEST(Dynamics, EnsembleIndependentOfThreadCount) {
    const auto m = line_model(0.5, 0.2);
    SamplerSpec g;
    g.kind = SamplerKind::gaussian;
    g.stddev = 1.0;
    const auto cfg = config(1e-2, 4.0, 3);
    setenv("SCOREMIX_THREADS", "1", 1);
    const auto serial = ensemble(m, g, 12, cfg);
    setenv("SCOREMIX_THREADS", "4", 1);
    const auto threaded = ensemble(m, g, 12, cfg);
    unsetenv("SCOREMIX_THREADS");
    ASSERT_EQ(serial.size(), threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].states, threaded[i].states);
    EXPECT_EQ(serial[5].meta.seed, 8u);
    auto physical = [&] { ensemble(m, g, 2, cfg, TrajectoryMode::physical_ode); };
    EXPECT_THROW(physical(), InvalidArgument);
}

TEST(Dynamics, Samplers) {
    SamplerSpec grid;
    grid.kind = SamplerKind::grid;
    grid.lower = vec2(0, -1);
    grid.upper = vec2(1, 1);
    grid.grid_n = 3;
    const auto pts = sample_initial_states(grid, 2, 0, 0);
    ASSERT_EQ(pts.size(), 9u);
    EXPECT_EQ(pts.front(), vec2(0, -1));
    EXPECT_EQ(pts.back(), vec2(1, 1));
    SamplerSpec g;
    g.kind = SamplerKind::gaussian;
    EXPECT_EQ(sample_initial_states(g, 3, 5, 9), sample_initial_states(g, 3, 5, 9));
    EXPECT_THROW(sample_initial_states(g, 3, 0, 9), InvalidArgument);
    SamplerSpec f;
    f.kind = SamplerKind::file;
    EXPECT_THROW(sample_initial_states(f, 1, 1, 0), InvalidArgument);
    f.points = {vec2(0, 0)};
    EXPECT_THROW(sample_initial_states(f, 1, 1, 0), DimensionMismatch);
}

TEST(LimitInclusion, SlidesOntoCfgInterface) {
    const auto tr = simulate_limit_inclusion(line_model(2.0), v1(0.6), config(1e-2, 20.0));
    EXPECT_NEAR(tr.terminal()[0], 0.75, 1e-12);
    EXPECT_TRUE(tr.warnings.empty());
}

TEST(LimitInclusion, ConvergesToSmoothMinimizers) {
    const auto m = line_model(0.5);
    for (const auto& [start, target] : {std::pair{-0.3, -0.5}, std::pair{1.1, 1.25}, std::pair{4.0, 3.5}}) {
        const auto tr = simulate_limit_inclusion(m, v1(start), config(1e-2, 30.0));
        EXPECT_NEAR(tr.terminal()[0], target, 1e-5) << "start " << start;
        for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(phi(m, tr.states[i]), phi(m, tr.states[i - 1]) + 1e-12);
    }
}

TEST(LimitInclusion, TwoDimensionalSlidingStaysOnInterface) {
    // A2 = {(-1,0),(1,0)} ties on x = 0 and, with lambda = 2, both pair fields point toward it.
    const MixedScoreModel m(datasets::dirac(vec2(0, 3)), EmpiricalMeasure::from_points({vec2(-1, 0), vec2(1, 0)}), 2.0);
    const auto tr = simulate_limit_inclusion(m, vec2(0.2, 0.0), config(1e-2, 40.0));
    EXPECT_NEAR(tr.terminal()[0], 0.0, 1e-10);
    // along the interface the field is -(1/2)(y - 2 * 3)
    EXPECT_NEAR(tr.terminal()[1], 6.0, 1e-5);
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(phi(m, tr.states[i]), phi(m, tr.states[i - 1]) + 1e-12);
}
