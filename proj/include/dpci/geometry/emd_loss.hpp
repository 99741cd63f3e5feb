#pragma once

#include "dpci/geometry/emd.hpp"

namespace dpci {

/// Mean matched distance between a predicted [N x 3] tensor and a target cloud.
///
/// The assignment is solved on the current values and then held fixed, so the
/// gradient of each predicted point is the unit vector from its matched target,
/// scaled by 1/N (zero where the two coincide).
template <typename T>
Tensor<T> emd_loss(const Tensor<T>& pred, const PointCloud& target, std::size_t cap = kExactEmdCap,
                   Assignment* used = nullptr) {
    PointCloud p = to_cloud(pred);
    detail::require_equal_size(p, target, "emd_loss");
    Assignment a = emd(p, target, cap);
    const std::size_t n = p.size();
    std::vector<T> dir(n * 3, T{});
    for (std::size_t i = 0; i < n; ++i) {
        const Point3& q = target[a.perm[i]];
        const double dist = distance(p[i], q);
        if (dist > 0)
            for (std::size_t c = 0; c < 3; ++c) dir[i * 3 + c] = static_cast<T>((p[i][c] - q[c]) / dist);
    }
    const T value = static_cast<T>(a.cost);
    if (used) *used = a;
    return detail::record<T>({}, std::vector<T>{value}, {pred}, [n, dir = std::move(dir)](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        const T w = self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < dir.size(); ++i) g[i] += w * dir[i];
    });
}

}  // namespace dpci
