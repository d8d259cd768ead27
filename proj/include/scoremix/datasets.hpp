#ifndef SCOREMIX_DATASETS_HPP
#define SCOREMIX_DATASETS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "measure.hpp"
#include "random.hpp"

namespace scoremix::datasets {

/// 1D pair: {-1, 1, 2} and {0, 1.5, 5}, uniform weights.
inline EmpiricalMeasure line_first() { return EmpiricalMeasure::from_scalars({-1.0, 1.0, 2.0}, {}, "line_first"); }
inline EmpiricalMeasure line_second() { return EmpiricalMeasure::from_scalars({0.0, 1.5, 5.0}, {}, "line_second"); }

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

/// 2D three-point pair, uniform weights.
inline EmpiricalMeasure plane_first() {
    return EmpiricalMeasure::from_points({vec2(-3.0, 2.2), vec2(-1.2, -2.6), vec2(1.0, 1.3)}, {}, "plane_first");
}
inline EmpiricalMeasure plane_second() {
    return EmpiricalMeasure::from_points({vec2(2.8, -3.2), vec2(4.0, 2.6), vec2(0.2, -0.2)}, {}, "plane_second");
}

/// Midpoints of the equal cells splitting [-1.5,-1.2] u [-0.8,0.8] u [1.2,1.5]
/// at `density` cells per unit length.
inline std::vector<double> segment_samples(double density = 200.0) {
    if (!(density > 0.0)) throw InvalidArgument("segment density must be positive");
    const std::pair<double, double> pieces[] = {{-1.5, -1.2}, {-0.8, 0.8}, {1.2, 1.5}};
    std::vector<double> s;
    for (const auto& [a, b] : pieces) {
        const auto n = std::max<long long>(1, std::llround((b - a) * density));
        for (long long i = 0; i < n; ++i) s.push_back(a + (b - a) * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    }
    return s;
}

/// Uniform samples of I x {-1, 1} (horizontal segments).
inline EmpiricalMeasure segments_horizontal(double density = 200.0) {
    std::vector<Vec> pts;
    for (double y : {-1.0, 1.0}) {
        for (double x : segment_samples(density)) pts.push_back(vec2(x, y));
    }
    return EmpiricalMeasure::from_points(pts, {}, "segments_horizontal");
}

/// Uniform samples of {-1, 1} x I (vertical segments).
inline EmpiricalMeasure segments_vertical(double density = 200.0) {
    std::vector<Vec> pts;
    for (double x : {-1.0, 1.0}) {
        for (double y : segment_samples(density)) pts.push_back(vec2(x, y));
    }
    return EmpiricalMeasure::from_points(pts, {}, "segments_vertical");
}

inline EmpiricalMeasure dirac(const Vec& a) { return EmpiricalMeasure::from_points({a}, {}, "dirac"); }

/// n standard-normal points in R^d, reproducible from the seed.
inline EmpiricalMeasure gaussian_cloud(std::size_t d, std::size_t n, std::uint64_t seed, double scale = 1.0) {
    const NormalStream normal(seed);
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < n; ++i) {
        Vec p(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) p[static_cast<Eigen::Index>(j)] = scale * normal(i, j);
        pts.push_back(std::move(p));
    }
    return EmpiricalMeasure::from_points(pts, {}, "gaussian_cloud");
}

/// Named built-in pair: "line", "plane" or "segments".
inline std::pair<EmpiricalMeasure, EmpiricalMeasure> builtin_pair(const std::string& name, double density = 200.0) {
    if (name == "line") return {line_first(), line_second()};
    if (name == "plane") return {plane_first(), plane_second()};
    if (name == "segments") return {segments_horizontal(density), segments_vertical(density)};
    throw InvalidArgument("unknown built-in dataset '" + name + "' (expected line, plane or segments)");
}

}  // namespace scoremix::datasets

#endif  // SCOREMIX_DATASETS_HPP
