#pragma once

#include "dpci/geometry/knn.hpp"

namespace dpci {

namespace detail {
inline double mean_nearest_sq(const PointCloud& from, const PointCloud& to) {
    KdTree3 tree(to.points);
    double s = 0;
    for (const auto& q : from.points) s += tree.nearest(q, 1, KdTree3::npos).front().first;
    return s / static_cast<double>(from.size());
}
}  // namespace detail

/// Symmetric Chamfer distance with squared Euclidean distances, each direction
/// averaged over its own cloud.
inline double chamfer(const PointCloud& x, const PointCloud& y) {
    if (x.empty() || y.empty()) throw ArgumentError("chamfer: empty point cloud");
    return detail::mean_nearest_sq(x, y) + detail::mean_nearest_sq(y, x);
}

}  // namespace dpci
