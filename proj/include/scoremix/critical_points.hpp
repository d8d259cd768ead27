#ifndef SCOREMIX_CRITICAL_POINTS_HPP
#define SCOREMIX_CRITICAL_POINTS_HPP

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "geometry.hpp"

namespace scoremix {

enum class CriticalKind { smooth_local_min, interface_point, saddle_candidate };

inline const char* to_string(CriticalKind k) {
    switch (k) {
        case CriticalKind::smooth_local_min: return "smooth_local_min";
        case CriticalKind::interface_point: return "interface_point";
        case CriticalKind::saddle_candidate: return "saddle_candidate";
    }
    return "unknown";
}

/// A certified outer-Clarke critical point of Phi_lambda.
struct CriticalPointRecord {
    Vec x_star;
    std::vector<std::size_t> active1;
    std::vector<std::size_t> active2;
    CriticalKind classification = CriticalKind::saddle_candidate;
    double phi_value = 0.0;
    double residual = 0.0;  // norm of the minimum-norm outer subgradient
    std::string source;     // "pair", "stratum" or "descent"

    bool is_local_min() const { return classification != CriticalKind::saddle_candidate; }
};

struct EnumerationOptions {
    std::size_t max_active = 3;      // bound on |I| and |J|
    Vec lower;                       // search box; empty selects an automatic box
    Vec upper;
    std::size_t grid_n = 12;         // probe / descent starts per axis
    bool grid_probing = true;
    bool descent = true;
    double descent_tau = 60.0;
    double descent_dtau = 1e-2;
    double cluster_radius = 1e-6;
    double probe_radius = 1e-3;
    std::size_t probe_count = 720;
    double residual_tol = 1e-8;
    double tie_tol = kDefaultTieTol;
    std::size_t exhaustive_limit = 20000;  // enumerate every key when there are at most this many
};

struct EnumerationResult {
    std::vector<CriticalPointRecord> records;
    std::vector<std::string> diagnostics;
    std::size_t strata_solved = 0;
    std::size_t strata_inconsistent = 0;

    std::vector<CriticalPointRecord> minimizers() const {
        std::vector<CriticalPointRecord> out;
        std::copy_if(records.begin(), records.end(), std::back_inserter(out), [](const auto& r) { return r.is_local_min(); });
        return out;
    }
};

/// Box around both supports and every smooth candidate
/// lambda x_k + (1 - lambda) y_l, padded by 10% of its extent plus one.
inline std::pair<Vec, Vec> default_search_box(const MixedScoreModel& model) {
    Vec lower = model.mu1.lower_bound().cwiseMin(model.mu2.lower_bound());
    Vec upper = model.mu1.upper_bound().cwiseMax(model.mu2.upper_bound());
    const double lam = model.lambda;
    // lambda >= 0 always; the second coefficient flips sign in the CFG regime.
    const Vec c_lo = lam * model.mu1.lower_bound() + (1.0 - lam) * (lam <= 1.0 ? model.mu2.lower_bound() : model.mu2.upper_bound());
    const Vec c_hi = lam * model.mu1.upper_bound() + (1.0 - lam) * (lam <= 1.0 ? model.mu2.upper_bound() : model.mu2.lower_bound());
    lower = lower.cwiseMin(c_lo);
    upper = upper.cwiseMax(c_hi);
    const Vec pad = (0.1 * (upper - lower)).array() + 1.0;
    return {lower - pad, upper + pad};
}

namespace detail {

/// Stratum key with the index set of an inactive measure reduced to its
/// lowest member, so that ties there do not split records.
inline StratumKey normalized_key(const MixedScoreModel& model, StratumKey key) {
    if (!model.first_active()) key.I.resize(1);
    if (!model.second_active()) key.J.resize(1);
    return key;
}

/// Nonempty subsets of `pool` of size at most m, in increasing size then lexicographic order.
inline std::vector<std::vector<std::size_t>> bounded_subsets(const std::vector<std::size_t>& pool, std::size_t m) {
    std::vector<std::vector<std::size_t>> out;
    const std::size_t n = pool.size();
    std::vector<std::size_t> pick;
    auto rec = [&](auto&& self, std::size_t start, std::size_t size) -> void {
        if (pick.size() == size) {
            out.push_back(pick);
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            pick.push_back(pool[i]);
            self(self, i + 1, size);
            pick.pop_back();
        }
    };
    for (std::size_t s = 1; s <= std::min(m, n); ++s) rec(rec, 0, s);
    return out;
}

inline double subset_count(std::size_t n, std::size_t m) {
    double total = 0.0;
    double c = 1.0;
    for (std::size_t s = 1; s <= std::min(m, n); ++s) {
        c = c * static_cast<double>(n - s + 1) / static_cast<double>(s);
        total += c;
    }
    return total;
}

inline std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

/// Indices whose squared distance is within `margin` of the minimum, nearest first.
inline std::vector<std::size_t> near_indices(const EmpiricalMeasure& mu, const Vec& x, double margin, std::size_t cap) {
    const Vec sq = mu.squared_distances(x);
    const double best = sq.minCoeff();
    std::vector<std::size_t> idx;
    for (Eigen::Index k = 0; k < sq.size(); ++k) {
        if (sq[k] <= best + margin) idx.push_back(static_cast<std::size_t>(k));
    }
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return sq[static_cast<Eigen::Index>(a)] < sq[static_cast<Eigen::Index>(b)]; });
    if (idx.size() > cap) idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

class Enumerator {
public:
    Enumerator(const MixedScoreModel& model, const EnumerationOptions& opts) : model_(model), opts_(opts) {
        directions_ = probe_directions(model.dim(), opts.probe_count);
    }

    EnumerationResult run() {
        model_.validate();
        if (opts_.max_active < 1) throw InvalidArgument("max_active must be at least 1");
        if (opts_.grid_n < 2) throw InvalidArgument("grid_n must be at least 2");
        setup_box();

        pair_pass();
        const double keys = subset_count(model_.mu1.size(), opts_.max_active) * subset_count(model_.mu2.size(), opts_.max_active);
        const bool low_dim = model_.dim() <= 3;
        if (keys <= static_cast<double>(opts_.exhaustive_limit)) {
            exhaustive_strata();
        } else if (opts_.grid_probing && low_dim) {
            probed_strata();
        }
        if (!low_dim && (opts_.grid_probing || opts_.descent))
            result_.diagnostics.push_back("dimension " + std::to_string(model_.dim()) +
                                          " > 3: grid probing and descent skipped, exact pass only");
        if (opts_.descent && low_dim) descent_pass();

        for (auto& [key, rec] : found_) result_.records.push_back(rec);
        std::sort(result_.records.begin(), result_.records.end(), [](const auto& a, const auto& b) {
            if (a.phi_value != b.phi_value) return a.phi_value < b.phi_value;
            return std::lexicographical_compare(a.x_star.begin(), a.x_star.end(), b.x_star.begin(), b.x_star.end());
        });
        return std::move(result_);
    }

private:
    const MixedScoreModel& model_;
    const EnumerationOptions& opts_;
    std::vector<Vec> directions_;
    Vec lower_;
    Vec upper_;
    std::map<StratumKey, CriticalPointRecord> found_;
    EnumerationResult result_;

    void setup_box() {
        const auto d = static_cast<Eigen::Index>(model_.dim());
        if (opts_.lower.size() != 0 || opts_.upper.size() != 0) {
            if (opts_.lower.size() != d || opts_.upper.size() != d) throw DimensionMismatch(model_.dim(), static_cast<std::size_t>(opts_.lower.size()));
            if ((opts_.upper - opts_.lower).minCoeff() <= 0.0) throw InvalidArgument("search box must have positive extent");
            lower_ = opts_.lower;
            upper_ = opts_.upper;
            return;
        }
        std::tie(lower_, upper_) = default_search_box(model_);
    }

    std::vector<Vec> box_grid() const {
        SamplerSpec grid;
        grid.kind = SamplerKind::grid;
        grid.lower = lower_;
        grid.upper = upper_;
        grid.grid_n = opts_.grid_n;
        return sample_initial_states(grid, model_.dim(), 0, 0);
    }

    double outer_residual(const Vec& x) const {
        const auto s = clarke_subdifferential(model_, x, SubgradientKind::outer_clarke, opts_.tie_tol);
        return min_norm_point(s.generators, 1e-12).point.norm();
    }

    CriticalKind classify(const Vec& x) const {
        const double base = phi(model_, x);
        const double slack = 1e-13 * (1.0 + std::abs(base));
        for (const auto& h : directions_) {
            if (phi(model_, x + opts_.probe_radius * h) < base - slack) return CriticalKind::saddle_candidate;
        }
        const auto nd = nd_indicator(model_, x, opts_.tie_tol);
        return on_active_interface(model_, nd) ? CriticalKind::interface_point : CriticalKind::smooth_local_min;
    }

    /// Records x if it is an outer critical point lying in `key`'s stratum.
    bool certify(const Vec& x, const StratumKey& key, const char* source) {
        if (!in_stratum(model_, x, key, opts_.tie_tol)) return false;
        const double res = outer_residual(x);
        if (res > opts_.residual_tol) return false;
        const StratumKey nkey = normalized_key(model_, stratum_of(model_, x, opts_.tie_tol));
        const auto it = found_.find(nkey);
        if (it != found_.end()) {
            const double gap = (it->second.x_star - x).norm();
            if (gap > 1e-6 * (1.0 + x.norm()))
                throw Error("two distinct critical points certified in one stratum (separation " + std::to_string(gap) + ")");
            return true;
        }
        CriticalPointRecord rec;
        rec.x_star = x;
        rec.active1 = nkey.I;
        rec.active2 = nkey.J;
        rec.phi_value = phi(model_, x);
        rec.residual = res;
        rec.classification = classify(x);
        rec.source = source;
        found_.emplace(nkey, std::move(rec));
        return true;
    }

    void pair_pass() {
        const double lam = model_.lambda;
        for (std::size_t k = 0; k < model_.mu1.size(); ++k) {
            for (std::size_t l = 0; l < model_.mu2.size(); ++l) {
                const Vec x = lam * model_.mu1.point(k) + (1.0 - lam) * model_.mu2.point(l);
                const StratumKey key = stratum_of(model_, x, opts_.tie_tol);
                const bool k_active = !model_.first_active() || std::binary_search(key.I.begin(), key.I.end(), k);
                const bool l_active = !model_.second_active() || std::binary_search(key.J.begin(), key.J.end(), l);
                if (k_active && l_active) certify(x, key, "pair");
            }
        }
    }

    void solve_key(const StratumKey& key) {
        const auto sol = solve_stratum(model_, key);
        ++result_.strata_solved;
        if (!sol) {
            ++result_.strata_inconsistent;
            return;
        }
        certify(sol->point, key, "stratum");
    }

    void exhaustive_strata() {
        // An inactive measure does not constrain the stratum; one representative key suffices.
        const auto I_all = model_.first_active() ? bounded_subsets(iota(model_.mu1.size()), opts_.max_active)
                                                 : std::vector<std::vector<std::size_t>>{{0}};
        const auto J_all = model_.second_active() ? bounded_subsets(iota(model_.mu2.size()), opts_.max_active)
                                                  : std::vector<std::vector<std::size_t>>{{0}};
        for (const auto& I : I_all) {
            for (const auto& J : J_all) solve_key({I, J});
        }
    }

    void probed_strata() {
        const Vec spacing = (upper_ - lower_) / static_cast<double>(opts_.grid_n - 1);
        const double h = spacing.norm();
        const std::size_t cap = opts_.max_active + 2;
        std::set<StratumKey> keys;
        for (const auto& x : box_grid()) {
            // Any point tied within the grid cell around x is within this squared-distance margin.
            const double r1 = std::sqrt(distance_squared(model_.mu1, x));
            const double r2 = std::sqrt(distance_squared(model_.mu2, x));
            const auto N1 = near_indices(model_.mu1, x, 4.0 * r1 * h + 4.0 * h * h, cap);
            const auto N2 = near_indices(model_.mu2, x, 4.0 * r2 * h + 4.0 * h * h, cap);
            for (const auto& I : bounded_subsets(N1, model_.first_active() ? opts_.max_active : 1)) {
                for (const auto& J : bounded_subsets(N2, model_.second_active() ? opts_.max_active : 1)) keys.insert({I, J});
            }
        }
        for (const auto& key : keys) solve_key(key);
    }

    void descent_pass() {
        IntegratorConfig cfg;
        cfg.dtau = opts_.descent_dtau;
        cfg.tau_max = opts_.descent_tau;
        const auto starts = box_grid();
        std::vector<Vec> limits(starts.size());
        parallel_for(starts.size(), [&](std::size_t i) { limits[i] = simulate_limit_inclusion(model_, starts[i], cfg).terminal(); });

        std::vector<Vec> centers;
        for (const auto& z : limits) {
            const bool seen = std::any_of(centers.begin(), centers.end(), [&](const Vec& c) { return (c - z).norm() <= opts_.cluster_radius; });
            if (!seen) centers.push_back(z);
        }
        std::size_t uncertified = 0;
        for (const auto& z : centers) {
            if (!certify_limit(z)) ++uncertified;
        }
        if (uncertified > 0)
            result_.diagnostics.push_back(std::to_string(uncertified) + " descent limit(s) could not be certified");
    }

    /// Snaps a descent limit to an exact stratum solution: loose tie sets
    /// first, then their subsets.
    bool certify_limit(const Vec& z) {
        const double loose = 1e-6 * (1.0 + z.squaredNorm());
        const auto N1 = near_indices(model_.mu1, z, loose, opts_.max_active + 2);
        const auto N2 = near_indices(model_.mu2, z, loose, opts_.max_active + 2);
        auto I_sets = bounded_subsets(N1, model_.first_active() ? opts_.max_active : 1);
        auto J_sets = bounded_subsets(N2, model_.second_active() ? opts_.max_active : 1);
        std::vector<StratumKey> keys;
        for (const auto& I : I_sets) {
            for (const auto& J : J_sets) keys.push_back({I, J});
        }
        std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
            return a.I.size() + a.J.size() > b.I.size() + b.J.size();
        });
        for (const auto& key : keys) {
            const auto sol = solve_stratum(model_, key);
            if (!sol || (sol->point - z).norm() > 1e-4 * (1.0 + z.norm())) continue;
            if (certify(sol->point, key, "descent")) return true;
        }
        return false;
    }
};

}  // namespace detail

/// Critical points of Phi_lambda from an exact pass (smooth pair candidates
/// and bounded-cardinality strata) and a multi-start limiting-inclusion
/// descent pass, each certified by stratum membership and 0 in the outer
/// hull. Records are ordered by (Phi value, coordinates).
inline EnumerationResult enumerate_critical_points(const MixedScoreModel& model, const EnumerationOptions& opts = {}) {
    return detail::Enumerator(model, opts).run();
}

}  // namespace scoremix

#endif  // SCOREMIX_CRITICAL_POINTS_HPP
