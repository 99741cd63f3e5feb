#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "dpci/core/ops.hpp"
#include "dpci/geometry/point_cloud.hpp"

namespace dpci {

namespace detail {

// (squared distance, index); lexicographic order gives the tie rule.
using Candidate = std::pair<double, std::uint32_t>;

/// Static kd-tree over 3-D points. Leaves hold up to kLeaf points.
class KdTree3 {
public:
    explicit KdTree3(std::span<const Point3> pts) : pts_(pts), order_(pts.size()) {
        std::iota(order_.begin(), order_.end(), 0u);
        if (!pts.empty()) build(0, order_.size());
    }

    /// k best candidates by (d2, index), excluding `skip` (pass npos for none), sorted ascending.
    std::vector<Candidate> nearest(const Point3& q, std::size_t k, std::uint32_t skip) const {
        std::priority_queue<Candidate> heap;
        if (!nodes_.empty()) search(0, q, k, skip, heap);
        std::vector<Candidate> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    }

    static constexpr std::uint32_t npos = 0xffffffffu;

private:
    static constexpr std::size_t kLeaf = 8;

    struct KdNode {
        std::size_t lo, hi;  // range in order_
        int axis = -1;       // -1 for leaf
        double split = 0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t lo, std::size_t hi) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({lo, hi});
        if (hi - lo <= kLeaf) return id;
        Point3 mn = pts_[order_[lo]], mx = mn;
        for (std::size_t i = lo; i < hi; ++i)
            for (int c = 0; c < 3; ++c) {
                mn[c] = std::min(mn[c], pts_[order_[i]][c]);
                mx[c] = std::max(mx[c], pts_[order_[i]][c]);
            }
        int axis = 0;
        for (int c = 1; c < 3; ++c)
            if (mx[c] - mn[c] > mx[axis] - mn[axis]) axis = c;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return std::pair(pts_[a][axis], a) < std::pair(pts_[b][axis], b);
                         });
        const double split = pts_[order_[mid]][axis];
        const std::size_t l = build(lo, mid);
        const std::size_t r = build(mid, hi);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void search(std::size_t id, const Point3& q, std::size_t k, std::uint32_t skip,
                std::priority_queue<Candidate>& heap) const {
        const KdNode& n = nodes_[id];
        if (n.axis < 0) {
            for (std::size_t i = n.lo; i < n.hi; ++i) {
                const std::uint32_t j = order_[i];
                if (j == skip) continue;
                Candidate c{squared_distance(q, pts_[j]), j};
                if (heap.size() < k) {
                    heap.push(c);
                } else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        // Left subtree holds coordinates <= split, right holds >= split.
        const double diff = q[n.axis] - n.split;
        const std::size_t first = diff <= 0 ? n.left : n.right;
        const std::size_t second = diff <= 0 ? n.right : n.left;
        search(first, q, k, skip, heap);
        // Equal plane distance can still hide a tie with a lower index, so prune strictly.
        if (heap.size() < k || diff * diff <= heap.top().first) search(second, q, k, skip, heap);
    }

    std::span<const Point3> pts_;
    std::vector<std::uint32_t> order_;
    std::vector<KdNode> nodes_;
};

}  // namespace detail

/// k nearest rows of each row of a [N x d] row-major matrix (self excluded).
///
/// Rows are ordered by increasing Euclidean distance, ties by lower index. d == 3
/// goes through a kd-tree, other widths through an exhaustive scan; both produce the
/// same table since they compare identical squared distances.
template <typename T>
IndexMatrix knn_indices(std::span<const T> rows, std::size_t n, std::size_t d, std::size_t k) {
    if (rows.size() != n * d) throw DimensionError("knn_indices: data size does not match N x d");
    if (k >= n) {
        throw ArgumentError("knn_indices: k = " + std::to_string(k) + " must be smaller than N = " + std::to_string(n));
    }
    IndexMatrix out{n, k, std::vector<std::uint32_t>(n * k)};
    if (k == 0) return out;
    if (d == 3) {
        std::vector<Point3> pts(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 3; ++c) pts[i][c] = static_cast<double>(rows[i * 3 + c]);
        detail::KdTree3 tree(pts);
        parallel_for(n, 64, [&](std::size_t i) {
            auto best = tree.nearest(pts[i], k, static_cast<std::uint32_t>(i));
            for (std::size_t j = 0; j < k; ++j) out.idx[i * k + j] = best[j].second;
        });
        return out;
    }
    parallel_for(n, 16, [&](std::size_t i) {
        std::vector<detail::Candidate> cand;
        cand.reserve(n - 1);
        const T* a = rows.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const T* b = rows.data() + j * d;
            double s = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
                s += diff * diff;
            }
            cand.emplace_back(s, static_cast<std::uint32_t>(j));
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        for (std::size_t j = 0; j < k; ++j) out.idx[i * k + j] = cand[j].second;
    });
    return out;
}

inline IndexMatrix knn_indices(const PointCloud& p, std::size_t k) {
    std::vector<double> flat;
    flat.reserve(p.size() * 3);
    for (const auto& q : p.points) flat.insert(flat.end(), q.begin(), q.end());
    return knn_indices<double>(flat, p.size(), 3, k);
}

template <typename T>
IndexMatrix knn_indices(const Tensor<T>& features, std::size_t k) {
    if (features.rank() != 2) throw DimensionError("knn_indices: expected [N x d], got " + shape_str(features.shape()));
    return knn_indices<T>(features.values(), features.dim(0), features.dim(1), k);
}

}  // namespace dpci
