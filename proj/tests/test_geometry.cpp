#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dpci/geometry/chamfer.hpp"
#include "dpci/geometry/emd.hpp"
#include "dpci/geometry/knn.hpp"
#include "dpci/geometry/normalize.hpp"

using namespace dpci;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
    return c;
}

// O(N^2) oracle: sort every other row by (distance, index).
IndexMatrix knn_oracle(const std::vector<double>& rows, std::size_t n, std::size_t d, std::size_t k) {
    IndexMatrix out{n, k, {}};
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::uint32_t>> cand;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0;
            for (std::size_t c = 0; c < d; ++c) s += (rows[i * d + c] - rows[j * d + c]) * (rows[i * d + c] - rows[j * d + c]);
            cand.emplace_back(s, static_cast<std::uint32_t>(j));
        }
        std::sort(cand.begin(), cand.end());
        for (std::size_t j = 0; j < k; ++j) out.idx.push_back(cand[j].second);
    }
    return out;
}

double chamfer_oracle(const PointCloud& x, const PointCloud& y) {
    auto dir = [](const PointCloud& a, const PointCloud& b) {
        double s = 0;
        for (const auto& p : a.points) {
            double best = INFINITY;
            for (const auto& q : b.points) best = std::min(best, squared_distance(p, q));
            s += best;
        }
        return s / static_cast<double>(a.size());
    };
    return dir(x, y) + dir(y, x);
}

PointCloud rigid(const PointCloud& c, double angle, Point3 shift) {
    PointCloud out = c;
    const double cs = std::cos(angle), sn = std::sin(angle);
    for (auto& p : out.points) p = {cs * p[0] - sn * p[1] + shift[0], sn * p[0] + cs * p[1] + shift[1], p[2] + shift[2]};
    return out;
}

}  // namespace

// ---- kNN ----

TEST(Knn, ColinearPoints) {
    PointCloud c{{{0, 0, 0}, {1, 0, 0}, {10, 0, 0}}};
    auto idx = knn_indices(c, 1);
    EXPECT_EQ(idx.idx, (std::vector<std::uint32_t>{1, 0, 1}));
}

TEST(Knn, TetrahedronNeighboursAreTheOtherVertices) {
    PointCloud c{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
    auto idx = knn_indices(c, 3);
    for (std::uint32_t i = 0; i < 4; ++i) {
        std::vector<std::uint32_t> row(idx.idx.begin() + i * 3, idx.idx.begin() + i * 3 + 3);
        std::vector<std::uint32_t> want;
        for (std::uint32_t j = 0; j < 4; ++j)
            if (j != i) want.push_back(j);
        EXPECT_EQ(row, want) << "equal distances are ordered by index";
    }
}

TEST(Knn, KMustBeBelowN) {
    PointCloud c{{{0, 0, 0}, {1, 0, 0}}};
    EXPECT_THROW(knn_indices(c, 2), ArgumentError);
}

TEST(Knn, MatchesExhaustiveOracleInThreeAndSixteenDimensions) {
    for (std::size_t d : {3u, 16u}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> u(-1, 1);
            std::vector<double> rows(64 * d);
            for (auto& v : rows) v = u(rng);
            for (std::size_t k : {1u, 5u, 20u}) {
                auto got = knn_indices<double>(std::span<const double>(rows), 64, d, k);
                EXPECT_EQ(got.idx, knn_oracle(rows, 64, d, k).idx) << "d=" << d << " k=" << k;
            }
        }
    }
}

TEST(Knn, GridWithManyTiesMatchesOracle) {
    std::vector<double> rows;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int z = 0; z < 4; ++z) rows.insert(rows.end(), {double(x), double(y), double(z)});
    auto got = knn_indices<double>(std::span<const double>(rows), 64, 3, 10);
    EXPECT_EQ(got.idx, knn_oracle(rows, 64, 3, 10).idx);
}

TEST(Knn, TensorOverloadAgreesWithCloud) {
    auto c = random_cloud(40, 3);
    auto t = to_tensor<double>(c);
    EXPECT_EQ(knn_indices(t, 7).idx, knn_indices(c, 7).idx);
}

// ---- Chamfer ----

TEST(Chamfer, Examples) {
    auto c = random_cloud(20, 1);
    EXPECT_EQ(chamfer(c, c), 0.0);
    EXPECT_DOUBLE_EQ(chamfer(PointCloud{{{0, 0, 0}}}, PointCloud{{{3, 4, 0}}}), 50.0);
}

TEST(Chamfer, MatchesDoubleLoopOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto x = random_cloud(32, seed), y = random_cloud(32 + seed, seed + 100);
        EXPECT_NEAR(chamfer(x, y), chamfer_oracle(x, y), 1e-12);
    }
}

TEST(Chamfer, PermutationAndRigidMotionInvariance) {
    auto x = random_cloud(30, 5), y = random_cloud(30, 6);
    const double base = chamfer(x, y);
    PointCloud yp = y;
    std::mt19937_64 rng(1);
    std::shuffle(yp.points.begin(), yp.points.end(), rng);
    EXPECT_NEAR(chamfer(x, yp), base, 1e-12);
    EXPECT_NEAR(chamfer(rigid(x, 0.7, {1, -2, 3}), rigid(y, 0.7, {1, -2, 3})), base, 1e-6 * base);
}

// ---- normalize_pair ----

TEST(NormalizePair, SymmetricPairExample) {
    PointCloud x{{{2, 0, 0}, {-2, 0, 0}}};
    auto np = normalize_pair(x, x);
    EXPECT_DOUBLE_EQ(np.transform.scale, 0.5);
    EXPECT_DOUBLE_EQ(np.x[0][0], 1.0);
    EXPECT_DOUBLE_EQ(np.y[1][0], -1.0);
    EXPECT_FALSE(np.transform.degenerate);
}

TEST(NormalizePair, RoundTripAndUnitRadius) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto x = random_cloud(25, seed, -3, 5), y = random_cloud(25, seed + 50, 0, 9);
        auto np = normalize_pair(x, y);
        double r = 0;
        for (const auto* c : {&np.x, &np.y})
            for (const auto& p : c->points) r = std::max(r, std::sqrt(squared_distance(p, {0, 0, 0})));
        EXPECT_NEAR(r, 1.0, 1e-9);
        auto back = np.transform.invert(np.x);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(back[i][c], x[i][c], 1e-6);
    }
}

TEST(NormalizePair, ZeroSpreadIsFlagged) {
    PointCloud x{{{1, 1, 1}, {1, 1, 1}}};
    auto np = normalize_pair(x, x);
    EXPECT_TRUE(np.transform.degenerate);
    EXPECT_EQ(np.transform.scale, 1.0);
    EXPECT_EQ(np.x[0][0], 0.0);
}

TEST(PointCloud, NonFiniteCoordinatesRejected) {
    PointCloud x{{{0, std::nan(""), 0}}};
    EXPECT_THROW(require_finite(x, "test"), NumericError);
}
