#ifndef SCOREMIX_DYNAMICS_HPP
#define SCOREMIX_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "geometry.hpp"
#include "random.hpp"

namespace scoremix {

enum class TrajectoryMode { physical_ode, similarity_ode, similarity_sde, limit_inclusion };
enum class StepMethod { euler, rk4 };
enum class SlidingMode { project, chatter };

inline const char* to_string(TrajectoryMode m) {
    switch (m) {
        case TrajectoryMode::physical_ode: return "physical_ode";
        case TrajectoryMode::similarity_ode: return "similarity_ode";
        case TrajectoryMode::similarity_sde: return "similarity_sde";
        case TrajectoryMode::limit_inclusion: return "limit_inclusion";
    }
    return "unknown";
}

inline constexpr double kDefaultTimeFloor = 1e-4;

struct IntegratorConfig {
    double dtau = 1e-2;
    double tau_max = std::log(1.0 / kDefaultTimeFloor);
    std::uint64_t seed = 0;
    double sliding_tol = 1e-7;
    StepMethod method = StepMethod::euler;
    SlidingMode sliding = SlidingMode::project;

    /// Defaults with tau_max = log(T / t_min).
    static IntegratorConfig for_horizon(double T, double t_min = kDefaultTimeFloor) {
        if (!(t_min > 0.0 && t_min < T)) throw InvalidArgument("t_min must lie in (0, T)");
        IntegratorConfig c;
        c.tau_max = std::log(T / t_min);
        return c;
    }

    void validate() const {
        if (!(dtau > 0.0) || !std::isfinite(dtau)) throw InvalidArgument("dtau must be positive");
        if (!(tau_max > 0.0) || !std::isfinite(tau_max)) throw InvalidArgument("tau_max must be positive");
        if (!(sliding_tol >= 0.0)) throw InvalidArgument("sliding_tol must be nonnegative");
    }

    std::size_t steps() const {
        const auto n = std::llround(tau_max / dtau);
        return static_cast<std::size_t>(std::max<long long>(n, 1));
    }
};

struct TrajectoryMeta {
    double lambda = 0.0;
    double T = 1.0;
    double epsilon = 0.0;
    double dtau = 0.0;
    double tau_max = 0.0;
    std::uint64_t seed = 0;
};

/// Time-stamped path. Similarity modes store tau; physical mode stores t.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<double> drift_norm_sq;
    TrajectoryMode mode = TrajectoryMode::similarity_ode;
    TrajectoryMeta meta;
    std::vector<std::string> warnings;

    std::size_t size() const { return states.size(); }
    const Vec& terminal() const { return states.back(); }

    /// Similarity time of sample i, converting physical time when needed.
    double tau_at(std::size_t i) const {
        return mode == TrajectoryMode::physical_ode ? std::log(meta.T / times[i]) : times[i];
    }
};

namespace detail {

inline TrajectoryMeta make_meta(const MixedScoreModel& model, const IntegratorConfig& cfg) {
    return {model.lambda, model.T, model.epsilon, cfg.dtau, cfg.tau_max, cfg.seed};
}

inline void check_finite(const Vec& y, const char* what, std::size_t step) {
    if (!y.allFinite()) throw IntegrationFailure(what, step);
}

/// -(1/4) grad F_lambda(y, T e^{-tau}), the rescaled drift.
inline Vec rescaled_drift(const MixedScoreModel& model, const Vec& y, double tau) {
    return -0.25 * grad_rescaled_potential(model, y, model.T * std::exp(-tau));
}

/// Shared Euler / Euler-Maruyama loop; `coef` multiplies -grad F.
inline Trajectory integrate_similarity(const MixedScoreModel& model, const Vec& x_T, const IntegratorConfig& cfg,
                                       double coef, double noise_amp, TrajectoryMode mode) {
    model.validate();
    cfg.validate();
    model.mu1.check_dim(x_T);
    const std::size_t n = cfg.steps();
    const double h = cfg.dtau;
    const double sqrt_h = std::sqrt(h);
    const auto d = static_cast<std::uint64_t>(model.dim());
    const NormalStream noise(cfg.seed);

    Trajectory tr;
    tr.mode = mode;
    tr.meta = make_meta(model, cfg);
    tr.times.reserve(n + 1);
    tr.states.reserve(n + 1);
    tr.drift_norm_sq.reserve(n + 1);

    Vec y = x_T;
    for (std::size_t i = 0;; ++i) {
        const double tau = static_cast<double>(i) * h;
        const double t = model.T * std::exp(-tau);
        const Vec grad = grad_rescaled_potential(model, y, t);
        const Vec drift = -coef * grad;
        tr.times.push_back(tau);
        tr.states.push_back(y);
        tr.drift_norm_sq.push_back(drift.squaredNorm());
        if (i == n) break;
        if (cfg.method == StepMethod::rk4 && noise_amp == 0.0) {
            const auto f = [&](const Vec& z, double s) -> Vec {
                return -coef * grad_rescaled_potential(model, z, model.T * std::exp(-s));
            };
            const Vec k1 = drift;
            const Vec k2 = f(y + 0.5 * h * k1, tau + 0.5 * h);
            const Vec k3 = f(y + 0.5 * h * k2, tau + 0.5 * h);
            const Vec k4 = f(y + h * k3, tau + h);
            y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            y += h * drift;
            if (noise_amp != 0.0) {
                const double amp = noise_amp * std::exp(-0.5 * tau) * sqrt_h;
                for (std::uint64_t j = 0; j < d; ++j) y[static_cast<Eigen::Index>(j)] += amp * noise(i, j);
            }
        }
        check_finite(y, "non-finite state in similarity-time integration", i + 1);
    }
    return tr;
}

}  // namespace detail

/// Explicit Euler (or RK4 reference) on dY/dtau = -(1/4) grad F_lambda(Y, T e^{-tau}).
inline Trajectory simulate_similarity_ode(const MixedScoreModel& model, const Vec& x_T, const IntegratorConfig& cfg = {}) {
    return detail::integrate_similarity(model, x_T, cfg, 0.25, 0.0, TrajectoryMode::similarity_ode);
}

/// Euler-Maruyama on dY = -((1 + eps)/4) grad F dtau + sqrt(2 eps T) e^{-tau/2} dW.
/// Noise for path seed s, step i and coordinate j is a fixed function of (s, i, j).
inline Trajectory simulate_similarity_sde(const MixedScoreModel& model, const Vec& x_T, const IntegratorConfig& cfg = {}) {
    IntegratorConfig euler = cfg;
    euler.method = StepMethod::euler;
    return detail::integrate_similarity(model, x_T, euler, 0.25 * (1.0 + model.epsilon),
                                        std::sqrt(2.0 * model.epsilon * model.T), TrajectoryMode::similarity_sde);
}

/// dX/dt = -grad V_lambda(X, t) integrated backward from T to t_min on a
/// log-uniform grid, Euler in log t. Times are physical and decreasing.
inline Trajectory simulate_physical_ode(const MixedScoreModel& model, const Vec& x_T, double t_min, std::size_t n_steps) {
    model.validate();
    model.mu1.check_dim(x_T);
    if (!(t_min > 0.0 && t_min < model.T)) throw InvalidArgument("t_min must lie in (0, T)");
    if (n_steps == 0) throw InvalidArgument("n_steps must be positive");
    const double tau_max = std::log(model.T / t_min);
    const double h = tau_max / static_cast<double>(n_steps);

    Trajectory tr;
    tr.mode = TrajectoryMode::physical_ode;
    tr.meta = {model.lambda, model.T, model.epsilon, h, tau_max, 0};
    if (n_steps == 1) tr.warnings.emplace_back("degenerate grid: single step, endpoints only");

    Vec x = x_T;
    for (std::size_t i = 0;; ++i) {
        const double t = model.T * std::exp(-static_cast<double>(i) * h);
        const Vec drift = t * mixed_score(model, x, t);  // X(log t - h) ~ X + h t grad V
        tr.times.push_back(t);
        tr.states.push_back(x);
        tr.drift_norm_sq.push_back(drift.squaredNorm());
        if (i == n_steps) break;
        x += h * drift;
        detail::check_finite(x, "non-finite state in physical-time integration", i + 1);
    }
    return tr;
}

namespace detail {

/// Autonomous stepper for dZ/dtau in -(1/4) outer-Clarke(Phi_lambda)(Z).
class InclusionStepper {
public:
    InclusionStepper(const MixedScoreModel& model, const IntegratorConfig& cfg) : model_(model), cfg_(cfg) {}

    /// Velocity selected at z: the lowest-index pair whose cell field keeps
    /// its own pair nearest, otherwise the interface-tangent sliding field.
    Vec velocity(const Vec& z) { return select(z, tie_sets(z)).v; }

    /// Advances z by h, splitting the step at Voronoi crossings.
    Vec step(const Vec& z0, double h) {
        Vec z = z0;
        double remaining = h;
        for (int events = 0; remaining > 0.0 && events < 32; ++events) {
            const Ties ties = tie_sets(z);
            const Selection sel = select(z, ties);
            Vec z1 = z + remaining * sel.v;
            if (sel.sliding) reproject(z1, ties.I, ties.J);
            double s = 1.0;
            if (model_.first_active()) s = std::min(s, crossing(model_.mu1, ties.I, sel.k, z, z1));
            if (model_.second_active()) s = std::min(s, crossing(model_.mu2, ties.J, sel.l, z, z1));
            if (s >= 1.0) return z1;
            z = z + s * (z1 - z);
            remaining *= 1.0 - s;
        }
        if (remaining > 0.0) z += remaining * velocity(z);
        return z;
    }

    std::size_t sliding_fallbacks() const { return fallbacks_; }

private:
    const MixedScoreModel& model_;
    const IntegratorConfig& cfg_;
    std::size_t fallbacks_ = 0;

    struct Ties {
        std::vector<std::size_t> I;
        std::vector<std::size_t> J;
    };

    struct Selection {
        Vec v;
        std::size_t k = 0;
        std::size_t l = 0;
        bool sliding = false;
    };

    Selection select(const Vec& z, const Ties& ties) {
        const auto& I = ties.I;
        const auto& J = ties.J;
        if ((I.size() == 1 && J.size() == 1) || cfg_.sliding == SlidingMode::chatter)
            return {pair_field(z, I[0], J[0]), I[0], J[0], false};
        for (auto k : I) {
            for (auto l : J) {
                Vec f = pair_field(z, k, l);
                if (keeps(model_.mu1, I, k, f) && keeps(model_.mu2, J, l, f)) return {std::move(f), k, l, false};
            }
        }
        return sliding_field(z, I, J);
    }

    Ties tie_sets(const Vec& z) {
        Ties t;
        t.I = nearest_set(model_.mu1, z, cfg_.sliding_tol).indices;
        t.J = nearest_set(model_.mu2, z, cfg_.sliding_tol).indices;
        if (!model_.first_active()) t.I.resize(1);
        if (!model_.second_active()) t.J.resize(1);
        return t;
    }

    Vec pair_field(const Vec& z, std::size_t k, std::size_t l) const {
        return -0.5 * (z - model_.lambda * model_.mu1.point(k) - (1.0 - model_.lambda) * model_.mu2.point(l));
    }

    /// Moving along f makes point k strictly nearest among the tied set.
    static bool keeps(const EmpiricalMeasure& mu, const std::vector<std::size_t>& tied, std::size_t k, const Vec& f) {
        const double scale = 1e-12 * (1.0 + f.norm());
        return std::all_of(tied.begin(), tied.end(), [&](std::size_t o) {
            return o == k || (mu.point(k) - mu.point(o)).dot(f) > scale;
        });
    }

    /// Rows 2 (p_i - p_0) and right-hand sides of the equal-distance system.
    void tie_system(const std::vector<std::size_t>& I, const std::vector<std::size_t>& J, Eigen::MatrixXd& B, Vec& r) const {
        const auto d = static_cast<Eigen::Index>(model_.dim());
        const auto rows = static_cast<Eigen::Index>(I.size() + J.size() - 2);
        B.resize(rows, d);
        r.resize(rows);
        Eigen::Index row = 0;
        auto add = [&](const EmpiricalMeasure& mu, const std::vector<std::size_t>& idx) {
            for (std::size_t i = 1; i < idx.size(); ++i) {
                B.row(row) = 2.0 * (mu.point(idx[i]) - mu.point(idx[0])).transpose();
                r[row] = mu.squared_norms()[static_cast<Eigen::Index>(idx[i])] - mu.squared_norms()[static_cast<Eigen::Index>(idx[0])];
                ++row;
            }
        };
        add(model_.mu1, I);
        add(model_.mu2, J);
    }

    /// Filippov sliding: every pair field has the same tangential part on
    /// M_{I,J}; use it when it lies in the hull of the pair fields, and the
    /// hull's minimum-norm element otherwise.
    Selection sliding_field(const Vec& z, const std::vector<std::size_t>& I, const std::vector<std::size_t>& J) {
        std::vector<Vec> fields;
        for (auto k : I) {
            for (auto l : J) fields.push_back(pair_field(z, k, l));
        }
        Eigen::MatrixXd B;
        Vec r;
        tie_system(I, J, B, r);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(B);
        cod.setThreshold(1e-10);
        const Vec tangent = fields.front() - cod.solve(B * fields.front());
        double scale = 1.0;
        for (const auto& f : fields) scale = std::max(scale, f.norm());
        if (distance_to_hull(fields, tangent) <= 1e-9 * scale) return {tangent, I[0], J[0], true};
        ++fallbacks_;
        return {min_norm_element(fields), I[0], J[0], false};
    }

    void reproject(Vec& z, const std::vector<std::size_t>& I, const std::vector<std::size_t>& J) const {
        Eigen::MatrixXd B;
        Vec r;
        tie_system(I, J, B, r);
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(B);
        cod.setThreshold(1e-10);
        z += cod.solve(r - B * z);
    }

    /// First fraction s in (0, 1] of the segment z -> z1 at which a point
    /// outside `tied` becomes as near as the selected point `ref`; the
    /// squared-distance differences are affine along the segment.
    static double crossing(const EmpiricalMeasure& mu, const std::vector<std::size_t>& tied, std::size_t selected,
                           const Vec& z, const Vec& z1) {
        const Vec s0 = mu.squared_distances(z);
        const Vec s1 = mu.squared_distances(z1);
        const auto ref = static_cast<Eigen::Index>(selected);
        double s = 1.0;
        for (Eigen::Index k = 0; k < s0.size(); ++k) {
            if (std::find(tied.begin(), tied.end(), static_cast<std::size_t>(k)) != tied.end()) continue;
            const double g0 = s0[ref] - s0[k];
            const double g1 = s1[ref] - s1[k];
            if (g1 > 0.0 && g0 <= 0.0) s = std::min(s, -g0 / (g1 - g0));
        }
        return s;
    }
};

}  // namespace detail

/// Event-aware explicit Euler for the limiting inclusion
/// dZ/dtau in -(1/4) outer-Clarke(Phi_lambda)(Z).
inline Trajectory simulate_limit_inclusion(const MixedScoreModel& model, const Vec& z0, const IntegratorConfig& cfg = {}) {
    model.validate();
    cfg.validate();
    model.mu1.check_dim(z0);
    const std::size_t n = cfg.steps();
    detail::InclusionStepper stepper(model, cfg);

    Trajectory tr;
    tr.mode = TrajectoryMode::limit_inclusion;
    tr.meta = detail::make_meta(model, cfg);
    Vec z = z0;
    for (std::size_t i = 0;; ++i) {
        tr.times.push_back(static_cast<double>(i) * cfg.dtau);
        tr.states.push_back(z);
        tr.drift_norm_sq.push_back(stepper.velocity(z).squaredNorm());
        if (i == n) break;
        z = stepper.step(z, cfg.dtau);
        detail::check_finite(z, "non-finite state in limit-inclusion integration", i + 1);
    }
    if (stepper.sliding_fallbacks() > 0)
        tr.warnings.push_back("sliding fallback to minimum-norm field used " + std::to_string(stepper.sliding_fallbacks()) + " times");
    return tr;
}

enum class SamplerKind { gaussian, grid, file };

/// Initial-state law for ensembles.
struct SamplerSpec {
    SamplerKind kind = SamplerKind::gaussian;
    Vec mean;                  // gaussian
    double stddev = 1.0;       // gaussian, isotropic
    Vec lower;                 // grid box
    Vec upper;                 // grid box
    std::size_t grid_n = 10;   // grid points per axis
    std::vector<Vec> points;   // file (already loaded)
};

/// Draws the initial states. Gaussian draws depend only on (seed, index).
inline std::vector<Vec> sample_initial_states(const SamplerSpec& spec, std::size_t dim, std::size_t n_paths, std::uint64_t seed) {
    std::vector<Vec> out;
    const auto d = static_cast<Eigen::Index>(dim);
    switch (spec.kind) {
        case SamplerKind::gaussian: {
            if (n_paths == 0) throw InvalidArgument("n_paths must be positive");
            const Vec mean = spec.mean.size() == 0 ? Vec::Zero(d) : spec.mean;
            if (mean.size() != d) throw DimensionMismatch(dim, static_cast<std::size_t>(mean.size()));
            const NormalStream normal(seed);
            constexpr std::uint64_t kInitialDomain = std::uint64_t{1} << 63;
            for (std::size_t i = 0; i < n_paths; ++i) {
                Vec x(d);
                for (Eigen::Index j = 0; j < d; ++j) x[j] = mean[j] + spec.stddev * normal(kInitialDomain + i, static_cast<std::uint64_t>(j));
                out.push_back(std::move(x));
            }
            break;
        }
        case SamplerKind::grid: {
            if (spec.lower.size() != d || spec.upper.size() != d) throw DimensionMismatch(dim, static_cast<std::size_t>(spec.lower.size()));
            if (spec.grid_n < 1) throw InvalidArgument("grid_n must be positive");
            std::size_t total = 1;
            for (Eigen::Index j = 0; j < d; ++j) total *= spec.grid_n;
            for (std::size_t idx = 0; idx < total; ++idx) {
                Vec x(d);
                std::size_t rest = idx;
                for (Eigen::Index j = 0; j < d; ++j) {
                    const std::size_t c = rest % spec.grid_n;
                    rest /= spec.grid_n;
                    const double frac = spec.grid_n == 1 ? 0.5 : static_cast<double>(c) / static_cast<double>(spec.grid_n - 1);
                    x[j] = spec.lower[j] + frac * (spec.upper[j] - spec.lower[j]);
                }
                out.push_back(std::move(x));
            }
            break;
        }
        case SamplerKind::file:
            if (spec.points.empty()) throw InvalidArgument("file sampler has no points");
            for (const auto& p : spec.points) {
                if (p.size() != d) throw DimensionMismatch(dim, static_cast<std::size_t>(p.size()));
            }
            out = spec.points;
            break;
    }
    return out;
}

/// Worker count: SCOREMIX_THREADS if set, else hardware concurrency.
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SCOREMIX_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<std::size_t>(v);
    }
    return std::min(n, std::max<std::size_t>(jobs, 1));
}

/// Runs body(i) for i < n on a static partition; exceptions are rethrown in index order.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = worker_count(n);
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t w) {
        for (std::size_t i = w; i < n; i += workers) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Independent paths from sampled initial states; path i uses seed + i.
inline std::vector<Trajectory> ensemble(const MixedScoreModel& model, const SamplerSpec& sampler, std::size_t n_paths,
                                        const IntegratorConfig& cfg, TrajectoryMode mode = TrajectoryMode::similarity_sde) {
    if (mode == TrajectoryMode::physical_ode) throw InvalidArgument("ensemble supports similarity-time and limit modes");
    const auto starts = sample_initial_states(sampler, model.dim(), n_paths, cfg.seed);
    std::vector<Trajectory> paths(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        IntegratorConfig c = cfg;
        c.seed = cfg.seed + i;
        switch (mode) {
            case TrajectoryMode::similarity_ode: paths[i] = simulate_similarity_ode(model, starts[i], c); break;
            case TrajectoryMode::similarity_sde: paths[i] = simulate_similarity_sde(model, starts[i], c); break;
            default: paths[i] = simulate_limit_inclusion(model, starts[i], c); break;
        }
    });
    return paths;
}

}  // namespace scoremix

#endif  // SCOREMIX_DYNAMICS_HPP
