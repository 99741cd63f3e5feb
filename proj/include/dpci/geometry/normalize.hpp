#pragma once

#include <algorithm>
#include <cmath>

#include "dpci/geometry/point_cloud.hpp"

namespace dpci {

/// x -> (x - center) * scale, applied identically to both clouds of a pair.
struct PairTransform {
    Point3 center{0, 0, 0};
    double scale = 1;
    bool degenerate = false;  // zero spread; scale left at 1

    Point3 apply(const Point3& p) const {
        return {(p[0] - center[0]) * scale, (p[1] - center[1]) * scale, (p[2] - center[2]) * scale};
    }
    Point3 invert(const Point3& p) const {
        return {p[0] / scale + center[0], p[1] / scale + center[1], p[2] / scale + center[2]};
    }
    PointCloud apply(const PointCloud& c) const {
        PointCloud out = c;
        for (auto& p : out.points) p = apply(p);
        return out;
    }
    PointCloud invert(const PointCloud& c) const {
        PointCloud out = c;
        for (auto& p : out.points) p = invert(p);
        return out;
    }
};

struct NormalizedPair {
    PointCloud x;
    PointCloud y;
    PairTransform transform;
};

/// Moves the joint centroid to the origin and scales both clouds by one factor so
/// the farthest point of either lies on the unit sphere.
inline NormalizedPair normalize_pair(const PointCloud& x, const PointCloud& y) {
    if (x.empty() || y.empty()) throw ArgumentError("normalize_pair: empty point cloud");
    PairTransform t;
    const double total = static_cast<double>(x.size() + y.size());
    for (const auto* c : {&x, &y})
        for (const auto& p : c->points)
            for (int k = 0; k < 3; ++k) t.center[k] += p[k];
    for (auto& c : t.center) c /= total;
    double r2 = 0;
    for (const auto* c : {&x, &y})
        for (const auto& p : c->points) r2 = std::max(r2, squared_distance(p, t.center));
    if (r2 > 0) {
        t.scale = 1.0 / std::sqrt(r2);
    } else {
        t.degenerate = true;
    }
    return {t.apply(x), t.apply(y), t};
}

}  // namespace dpci
