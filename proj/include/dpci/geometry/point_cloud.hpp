#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dpci/core/errors.hpp"
#include "dpci/core/tensor.hpp"

namespace dpci {

using Point3 = std::array<double, 3>;

/// N x 3 coordinate frame.
struct PointCloud {
    std::vector<Point3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Point3& operator[](std::size_t i) const { return points[i]; }
    Point3& operator[](std::size_t i) { return points[i]; }

    bool operator==(const PointCloud&) const = default;
};

inline double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

inline void require_finite(const PointCloud& p, const std::string& what) {
    for (std::size_t i = 0; i < p.size(); ++i)
        for (double c : p[i])
            if (!std::isfinite(c)) throw NumericError(what + ": non-finite coordinate at point " + std::to_string(i));
}

template <typename T>
Tensor<T> to_tensor(const PointCloud& p) {
    std::vector<T> v;
    v.reserve(p.size() * 3);
    for (const auto& q : p.points)
        for (double c : q) v.push_back(static_cast<T>(c));
    return Tensor<T>({p.size(), 3}, std::move(v));
}

template <typename T>
PointCloud to_cloud(const Tensor<T>& t) {
    if (t.rank() != 2 || t.dim(1) != 3) throw DimensionError("expected [N x 3] tensor, got " + shape_str(t.shape()));
    PointCloud p;
    p.points.resize(t.dim(0));
    auto v = t.values();
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t c = 0; c < 3; ++c) p.points[i][c] = static_cast<double>(v[i * 3 + c]);
    return p;
}

}  // namespace dpci
