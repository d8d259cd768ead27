#ifndef SCOREMIX_MEASURE_HPP
#define SCOREMIX_MEASURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "errors.hpp"

namespace scoremix {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kMergeTol = 1e-12;
inline constexpr double kDefaultTieTol = 1e-9;

/// Weighted finite point set in R^d. Immutable once constructed.
///
/// Construction normalizes the weights to unit mass and merges points that
/// coincide within kMergeTol, adding their weights.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;

    EmpiricalMeasure(Mat points, Vec weights, std::string label = {}) : label_(std::move(label)) {
        if (points.cols() == 0) throw InvalidArgument("empty measure");
        if (points.rows() == 0) throw InvalidArgument("points must have dimension >= 1");
        if (weights.size() != points.cols())
            throw InvalidArgument("weights size " + std::to_string(weights.size()) + " != " +
                                  std::to_string(points.cols()) + " points");
        for (Eigen::Index k = 0; k < weights.size(); ++k) {
            if (!(weights[k] > 0.0) || !std::isfinite(weights[k]))
                throw InvalidArgument("weights must be finite and strictly positive");
        }
        if (!points.allFinite()) throw InvalidArgument("points must be finite");
        merge_and_normalize(std::move(points), std::move(weights));
    }

    /// Uniform weights when `weights` is empty.
    static EmpiricalMeasure from_points(const std::vector<Vec>& pts, std::vector<double> weights = {},
                                        std::string label = {}) {
        if (pts.empty()) throw InvalidArgument("empty measure");
        const auto d = pts.front().size();
        Mat m(d, static_cast<Eigen::Index>(pts.size()));
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (pts[k].size() != d) throw DimensionMismatch(d, pts[k].size());
            m.col(static_cast<Eigen::Index>(k)) = pts[k];
        }
        Vec w;
        if (weights.empty()) {
            w = Vec::Constant(m.cols(), 1.0);
        } else {
            w = Eigen::Map<const Vec>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        }
        return EmpiricalMeasure(std::move(m), std::move(w), std::move(label));
    }

    /// 1D convenience constructor.
    static EmpiricalMeasure from_scalars(const std::vector<double>& xs, std::vector<double> weights = {},
                                         std::string label = {}) {
        std::vector<Vec> pts;
        pts.reserve(xs.size());
        for (double x : xs) pts.push_back(Vec::Constant(1, x));
        return from_points(pts, std::move(weights), std::move(label));
    }

    std::size_t dim() const { return static_cast<std::size_t>(points_.rows()); }
    std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
    const Mat& points() const { return points_; }
    auto point(std::size_t k) const { return points_.col(static_cast<Eigen::Index>(k)); }
    const Vec& weights() const { return weights_; }
    double weight(std::size_t k) const { return weights_[static_cast<Eigen::Index>(k)]; }
    const Vec& log_weights() const { return log_weights_; }
    const Vec& squared_norms() const { return sq_norms_; }
    const std::string& label() const { return label_; }

    double min_weight() const { return weights_.minCoeff(); }
    /// max_k ||x_k||
    double radius() const { return std::sqrt(sq_norms_.maxCoeff()); }
    Vec lower_bound() const { return points_.rowwise().minCoeff(); }
    Vec upper_bound() const { return points_.rowwise().maxCoeff(); }
    Vec mean() const { return points_ * weights_; }

    void check_dim(const Vec& x) const {
        if (static_cast<std::size_t>(x.size()) != dim()) throw DimensionMismatch(dim(), x.size());
    }

    /// ||x - x_k||^2 for every support point.
    Vec squared_distances(const Vec& x) const {
        check_dim(x);
        return (points_.colwise() - x).colwise().squaredNorm().transpose();
    }

private:
    void merge_and_normalize(Mat points, Vec weights) {
        const Eigen::Index n = points.cols();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            for (Eigen::Index r = 0; r < points.rows(); ++r) {
                if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
            }
            return a < b;
        });

        // Lexicographic sort: any point within kMergeTol of another lies in a
        // window where the first coordinate differs by at most kMergeTol.
        std::vector<Eigen::Index> rep(static_cast<std::size_t>(n), -1);
        for (std::size_t i = 0; i < order.size(); ++i) {
            const auto a = order[i];
            if (rep[static_cast<std::size_t>(a)] >= 0) continue;
            rep[static_cast<std::size_t>(a)] = a;
            for (std::size_t j = i + 1; j < order.size(); ++j) {
                const auto b = order[j];
                if (points(0, b) - points(0, a) > kMergeTol) break;
                if (rep[static_cast<std::size_t>(b)] >= 0) continue;
                if ((points.col(a) - points.col(b)).norm() <= kMergeTol) rep[static_cast<std::size_t>(b)] = a;
            }
        }

        // Keep first-occurrence order of the representatives.
        std::vector<Eigen::Index> kept;
        std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
        for (Eigen::Index k = 0; k < n; ++k) {
            if (rep[static_cast<std::size_t>(k)] == k) {
                slot[static_cast<std::size_t>(k)] = static_cast<Eigen::Index>(kept.size());
                kept.push_back(k);
            }
        }
        points_.resize(points.rows(), static_cast<Eigen::Index>(kept.size()));
        weights_ = Vec::Zero(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t s = 0; s < kept.size(); ++s) points_.col(static_cast<Eigen::Index>(s)) = points.col(kept[s]);
        for (Eigen::Index k = 0; k < n; ++k) {
            weights_[slot[static_cast<std::size_t>(rep[static_cast<std::size_t>(k)])]] += weights[k];
        }
        weights_ /= weights_.sum();
        log_weights_ = weights_.array().log().matrix();
        sq_norms_ = points_.colwise().squaredNorm().transpose();
    }

    Mat points_;
    Vec weights_;
    Vec log_weights_;
    Vec sq_norms_;
    std::string label_;
};

/// Support indices attaining the minimal distance to a query point.
struct NearestSet {
    std::vector<std::size_t> indices;
    double distance = 0.0;
    bool is_unique = true;
};

/// min_k ||x - x_k||^2
inline double distance_squared(const EmpiricalMeasure& mu, const Vec& x) {
    return mu.squared_distances(x).minCoeff();
}

/// Ties are decided on squared distances: every k with
/// ||x - x_k||^2 <= d(x)^2 + tie_tol is reported.
inline NearestSet nearest_set(const EmpiricalMeasure& mu, const Vec& x, double tie_tol = kDefaultTieTol) {
    if (tie_tol < 0.0) throw InvalidArgument("tie_tol must be nonnegative");
    const Vec sq = mu.squared_distances(x);
    const double best = sq.minCoeff();
    NearestSet out;
    for (Eigen::Index k = 0; k < sq.size(); ++k) {
        if (sq[k] <= best + tie_tol) out.indices.push_back(static_cast<std::size_t>(k));
    }
    out.distance = std::sqrt(best);
    out.is_unique = out.indices.size() == 1;
    return out;
}

enum class MeasureFormat { csv, json };

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t used = 0;
    try {
        const double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

/// Parses the CSV dataset format: one point per row, `#` comments, optional
/// header `x0,...,x{d-1}[,w]`. A weight column is recognized only when the
/// header names it `w`; headerless files are pure coordinates.
inline EmpiricalMeasure parse_measure_csv(std::istream& in, std::string label = {}) {
    std::vector<Vec> pts;
    std::vector<double> weights;
    bool header_seen = false;
    bool has_weight = false;
    std::size_t d = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto cells = detail::split_commas(t);
        if (pts.empty() && !header_seen && !detail::parse_double(cells.front())) {
            header_seen = true;
            has_weight = cells.back() == "w";
            d = cells.size() - (has_weight ? 1 : 0);
            if (d == 0) throw LoadError("header declares no coordinate columns");
            continue;
        }
        std::vector<double> vals;
        for (const auto& c : cells) {
            auto v = detail::parse_double(c);
            if (!v) throw LoadError("line " + std::to_string(lineno) + ": cannot parse '" + c + "'");
            vals.push_back(*v);
        }
        const std::size_t ncoord = vals.size() - (has_weight ? 1 : 0);
        if (d == 0) d = ncoord;
        if (ncoord != d || ncoord == 0)
            throw LoadError("line " + std::to_string(lineno) + ": dimension mismatch (expected " + std::to_string(d) +
                            " coordinates, got " + std::to_string(ncoord) + ")");
        Vec p(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) p[static_cast<Eigen::Index>(i)] = vals[i];
        pts.push_back(std::move(p));
        if (has_weight) {
            if (!(vals.back() > 0.0)) throw LoadError("line " + std::to_string(lineno) + ": nonpositive weight");
            weights.push_back(vals.back());
        }
    }
    if (pts.empty()) throw LoadError("empty dataset");
    return EmpiricalMeasure::from_points(pts, std::move(weights), std::move(label));
}

/// `{"points": [[...], ...], "weights": [...], "label": "..."}`; weights optional.
inline EmpiricalMeasure parse_measure_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("points")) throw LoadError("JSON dataset requires a 'points' array");
    std::vector<Vec> pts;
    std::size_t d = 0;
    for (const auto& row : j.at("points")) {
        std::vector<double> v = row.is_array() ? row.get<std::vector<double>>() : std::vector<double>{row.get<double>()};
        if (d == 0) d = v.size();
        if (v.size() != d || d == 0) throw LoadError("dimension mismatch across JSON points");
        pts.push_back(Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (pts.empty()) throw LoadError("empty dataset");
    std::vector<double> weights;
    if (j.contains("weights")) {
        weights = j.at("weights").get<std::vector<double>>();
        if (weights.size() != pts.size()) throw LoadError("weights length does not match points");
        for (double w : weights) {
            if (!(w > 0.0)) throw LoadError("nonpositive weight");
        }
    }
    return EmpiricalMeasure::from_points(pts, std::move(weights), j.value("label", std::string{}));
}

inline EmpiricalMeasure load_measure(const std::string& path, MeasureFormat format) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path);
    if (format == MeasureFormat::json) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(path + ": " + e.what());
        }
        return parse_measure_json(j);
    }
    return parse_measure_csv(in, path);
}

/// Format chosen by extension (.json, otherwise CSV).
inline EmpiricalMeasure load_measure(const std::string& path) {
    const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    return load_measure(path, json ? MeasureFormat::json : MeasureFormat::csv);
}

inline nlohmann::json to_json(const EmpiricalMeasure& mu) {
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t k = 0; k < mu.size(); ++k) {
        pts.push_back(std::vector<double>(mu.point(k).data(), mu.point(k).data() + mu.dim()));
    }
    return {{"points", pts},
            {"weights", std::vector<double>(mu.weights().data(), mu.weights().data() + mu.size())},
            {"label", mu.label()}};
}

}  // namespace scoremix

#endif  // SCOREMIX_MEASURE_HPP
