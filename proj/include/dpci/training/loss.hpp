#pragma once

#include "dpci/geometry/emd_loss.hpp"
#include "dpci/model/idea_net.hpp"

namespace dpci {

template <typename T>
struct LossTerms {
    Tensor<T> total;
    int term_count = 0;
};

/// Average of the two branch EMDs to the target. The single-branch model is
/// supervised on branch 0 only.
template <typename T>
LossTerms<T> dual_loss(const InterpolationOutput<T>& out, const PointCloud& target, std::size_t cap = kExactEmdCap) {
    if (out.o_0.dim(0) != target.size()) throw ArgumentError("dual_loss: target point count differs from output");
    if (out.single_branch) return {emd_loss(out.o_0, target, cap), 1};
    Tensor<T> l0 = emd_loss(out.o_0, target, cap);
    Tensor<T> l1 = emd_loss(out.o_1, target, cap);
    return {scale(add(l0, l1), T(0.5)), 2};
}

}  // namespace dpci
