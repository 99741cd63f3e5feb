#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "dpci/geometry/point_cloud.hpp"

namespace dpci {

/// Bijection between two equal-size clouds: x[i] is matched to y[perm[i]].
struct Assignment {
    std::vector<std::uint32_t> perm;
    double cost = 0;  // mean matched Euclidean distance
};

inline constexpr std::size_t kExactEmdCap = 512;

/// Mean matched distance, summed in index order.
inline double assignment_cost(const PointCloud& x, const PointCloud& y, const std::vector<std::uint32_t>& perm) {
    double s = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += distance(x[i], y[perm[i]]);
    return perm.empty() ? 0.0 : s / static_cast<double>(perm.size());
}

inline bool is_bijection(const std::vector<std::uint32_t>& perm) {
    std::vector<char> hit(perm.size(), 0);
    for (auto p : perm) {
        if (p >= perm.size() || hit[p]) return false;
        hit[p] = 1;
    }
    return true;
}

namespace detail {
inline void require_equal_size(const PointCloud& x, const PointCloud& y, const char* op) {
    if (x.size() != y.size()) {
        throw ArgumentError(std::string(op) + ": point counts differ (" + std::to_string(x.size()) + " vs " +
                            std::to_string(y.size()) + ")");
    }
    if (x.empty()) throw ArgumentError(std::string(op) + ": empty point cloud");
}
}  // namespace detail

/// Optimal assignment by the Hungarian method with row/column potentials, O(N^3).
inline Assignment emd_exact(const PointCloud& x, const PointCloud& y, std::size_t cap = kExactEmdCap) {
    detail::require_equal_size(x, y, "emd_exact");
    const std::size_t n = x.size();
    if (n > cap) {
        throw ArgumentError("emd_exact: N = " + std::to_string(n) + " exceeds exact cap " + std::to_string(cap));
    }
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = distance(x[i], y[j]);

    // 1-based arrays; column 0 is the virtual start column.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment a;
    a.perm.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) a.perm[match[j] - 1] = static_cast<std::uint32_t>(j - 1);
    a.cost = assignment_cost(x, y, a.perm);
    return a;
}

/// Parameters of the epsilon-scaling auction.
struct AuctionOptions {
    double tol = 0.01;          // relative cost tolerance vs the optimum
    double eps_factor = 0.2;    // eps multiplier between scaling phases
    double min_eps = 1e-12;     // absolute floor, in units of the largest matched cost
    std::size_t max_rounds = 50'000'000;  // bid budget per phase
};

/// Forward auction with epsilon scaling (minimizing total distance).
///
/// Each phase ends with an eps-complementary-slack assignment whose total cost is at
/// most N * eps above the optimum; scaling stops once that gap certifies the
/// relative tolerance, or eps reaches its floor.
inline Assignment emd_approx(const PointCloud& x, const PointCloud& y, const AuctionOptions& opt = {}) {
    detail::require_equal_size(x, y, "emd_approx");
    const std::size_t n = x.size();
    std::vector<double> cost(n * n);
    double cmax = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cmax = std::max(cmax, cost[i * n + j] = distance(x[i], y[j]));
    Assignment a;
    a.perm.resize(n);
    if (cmax == 0) {
        std::iota(a.perm.begin(), a.perm.end(), 0u);
        a.cost = 0;
        return a;
    }

    constexpr std::uint32_t none = 0xffffffffu;
    std::vector<double> price(n, 0);
    std::vector<std::uint32_t> owner(n), assigned(n);
    const double floor_eps = opt.min_eps * cmax;
    double eps = cmax / 4;
    for (;;) {
        std::fill(owner.begin(), owner.end(), none);
        std::fill(assigned.begin(), assigned.end(), none);
        std::vector<std::uint32_t> queue(n);
        std::iota(queue.begin(), queue.end(), 0u);
        std::size_t head = 0, rounds = 0;
        while (head < queue.size()) {
            if (++rounds > opt.max_rounds) {
                throw SolverError("emd_approx: auction did not converge within " + std::to_string(opt.max_rounds) +
                                      " bids",
                                  eps);
            }
            const std::uint32_t i = queue[head++];
            // Best and second-best net value -(cost + price).
            double best = -std::numeric_limits<double>::infinity(), second = best;
            std::uint32_t bj = 0;
            const double* row = cost.data() + static_cast<std::size_t>(i) * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double val = -(row[j] + price[j]);
                if (val > best) {
                    second = best;
                    best = val;
                    bj = static_cast<std::uint32_t>(j);
                } else if (val > second) {
                    second = val;
                }
            }
            const double incr = (n == 1 ? 0.0 : best - second) + eps;
            price[bj] += incr;
            if (owner[bj] != none) {
                assigned[owner[bj]] = none;
                queue.push_back(owner[bj]);
            }
            owner[bj] = i;
            assigned[i] = bj;
            if (queue.size() > 4 * n && head > 2 * n) {
                queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(head));
                head = 0;
            }
        }
        for (std::size_t i = 0; i < n; ++i) a.perm[i] = assigned[i];
        a.cost = assignment_cost(x, y, a.perm);
        const double total = a.cost * static_cast<double>(n);
        if (static_cast<double>(n) * eps * (1 + opt.tol) <= opt.tol * total || eps <= floor_eps) break;
        eps = std::max(eps * opt.eps_factor, floor_eps);
    }
    return a;
}

/// Exact solver up to `cap` points, auction above it.
inline Assignment emd(const PointCloud& x, const PointCloud& y, std::size_t cap = kExactEmdCap) {
    return x.size() <= cap ? emd_exact(x, y, cap) : emd_approx(x, y);
}

}  // namespace dpci
