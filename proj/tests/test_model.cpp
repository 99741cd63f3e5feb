#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dpci/model/idea_net.hpp"
#include "fd_oracle.hpp"

using namespace dpci;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
    return c;
}

ModelConfig small(Variant v = Variant::full) {
    ModelConfig c;
    c.width_mult = 0.125;
    c.k_neighbors = 8;
    c.variant = v;
    return c;
}

// Weight (in*out) plus either a bias (out) or gamma/beta (2*out).
std::size_t dense_params(std::size_t in, std::size_t out, bool norm) { return in * out + (norm ? 2 : 1) * out; }

std::size_t expected_param_count(double wm) {
    auto w = [&](std::size_t b) { return static_cast<std::size_t>(std::lround(b * wm)); };
    std::size_t n = 0, in = 3, concat = 0;
    for (std::size_t b : {64, 64, 128, 256}) {
        n += dense_params(2 * in, w(b), true);
        in = w(b);
        concat += in;
    }
    n += dense_params(concat, w(512), true);
    in = 3 * w(512);
    for (std::size_t b : {512, 256, 128}) {
        n += dense_params(in, w(b), true);
        in = w(b);
    }
    in = w(128) + 2 * w(512);
    for (std::size_t b : {1152, 576, 288}) {
        n += dense_params(in, w(b), true);
        in = w(b);
    }
    return n + dense_params(in, 3, false);
}

std::vector<double> vals(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(ModelConfig, FeatureWidths) {
    ModelConfig full;
    EXPECT_EQ(full.feature_width(), 1152u);
    EXPECT_EQ(small().feature_width(), 144u);
    ModelConfig bad;
    bad.width_mult = 0.3;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ModelConfig, EntriesRoundTrip) {
    ModelConfig c = small(Variant::e_no_compensation);
    c.eps_dist = 0.1;
    c.norm_instance_stats = true;
    ModelConfig d;
    for (const auto& [k, v] : c.entries()) ASSERT_TRUE(d.set(k, v)) << k;
    EXPECT_EQ(d.entries(), c.entries());
    EXPECT_EQ(d.eps_dist, 0.1);
    EXPECT_FALSE(d.set("no_such_key", "1"));
    EXPECT_THROW(d.set("use_norm", "maybe"), ConfigError);
    EXPECT_EQ(parse_variant("f"), Variant::f_single_branch);
    EXPECT_THROW(parse_variant("g"), ConfigError);
}

TEST(IdeaNet, ParameterCountMatchesLayerWidths) {
    for (double wm : {0.125, 0.25, 1.0}) {
        ModelConfig c;
        c.width_mult = wm;
        IdeaNet<float> net(c, 0);
        EXPECT_EQ(net.params().scalar_count(), expected_param_count(wm)) << wm;
    }
    EXPECT_EQ(expected_param_count(0.125), 55191u);
}

TEST(IdeaNet, EmbeddingShapeAndNeighbourLimit) {
    IdeaNet<double> net(small(), 1);
    auto f = net.embed(to_tensor<double>(random_cloud(32, 2)), Mode::eval);
    EXPECT_EQ(f.rows.shape(), (Shape{32, 144}));
    EXPECT_THROW(net.embed(to_tensor<double>(random_cloud(8, 2)), Mode::eval), ArgumentError);
}

TEST(IdeaNet, EmbeddingIsPermutationEquivariant) {
    IdeaNet<double> net(small(), 1);
    auto c = random_cloud(30, 4);
    std::vector<std::uint32_t> perm(30);
    std::iota(perm.begin(), perm.end(), 0u);
    std::mt19937_64 rng(9);
    std::shuffle(perm.begin(), perm.end(), rng);
    PointCloud cp;
    for (auto i : perm) cp.points.push_back(c[i]);
    auto f = vals(net.embed(to_tensor<double>(c), Mode::eval).rows);
    auto fp = vals(net.embed(to_tensor<double>(cp), Mode::eval).rows);
    const std::size_t d = 144;
    for (std::size_t r = 0; r < 30; ++r)
        for (std::size_t j = 0; j < d; ++j) ASSERT_NEAR(fp[r * d + j], f[perm[r] * d + j], 1e-9);
}

TEST(Alignment, RowsAreProbabilityDistributions) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        auto f0 = fd::random_param({20, 16}, rng), f1 = fd::random_param({20, 16}, rng);
        auto a = alignment(f0, f1, small()).a;
        auto v = a.values();
        for (std::size_t i = 0; i < 20; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < 20; ++j) {
                EXPECT_GE(v[i * 20 + j], 0.0);
                s += v[i * 20 + j];
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Alignment, IdenticalFramesMatchThemselves) {
    IdeaNet<double> net(small(), 5);
    auto c = to_tensor<double>(random_cloud(40, 6));
    auto f = net.embed(c, Mode::eval).rows;
    const auto am = alignment(f, f, small()).a;
    auto a = am.values();
    for (std::size_t i = 0; i < 40; ++i) {
        auto row = a.subspan(i * 40, 40);
        EXPECT_EQ(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()), i);
    }
}

TEST(Alignment, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    auto f0 = fd::random_param({6, 4}, rng), f1 = fd::random_param({6, 4}, rng);
    double err = fd::max_rel_error([](const auto& in) { return fd::probe(alignment(in[0], in[1], small()).a); },
                                   {f0, f1});
    EXPECT_LT(err, 1e-5);
}

TEST(Interpolation, PermutationAlignmentAveragesAtHalf) {
    std::mt19937_64 rng(1);
    Tensor<double> f0 = fd::random_param({5, 4}, rng).detach(), f1 = fd::random_param({5, 4}, rng).detach();
    std::vector<std::uint32_t> perm{2, 0, 4, 1, 3};
    auto p = permutation_matrix<double>(perm);
    auto [g0, g1] = fuse_features(f0, f1, p, 0.5, false);
    auto a = f0.values(), b = f1.values(), r0 = g0.values(), r1 = g1.values();
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t c = 0; c < 4; ++c) {
            EXPECT_NEAR(r0[i * 4 + c], 0.5 * a[i * 4 + c] + 0.5 * b[perm[i] * 4 + c], 1e-15);
            // Transposed permutation sends frame 0 rows back to frame 1 positions.
            EXPECT_NEAR(r1[perm[i] * 4 + c], 0.5 * a[i * 4 + c] + 0.5 * b[perm[i] * 4 + c], 1e-15);
        }
}

TEST(Interpolation, EndpointsAreExact) {
    std::mt19937_64 rng(2);
    auto p0 = to_tensor<double>(random_cloud(7, 1)), p1 = to_tensor<double>(random_cloud(7, 2));
    auto a = alignment(fd::random_param({7, 3}, rng), fd::random_param({7, 3}, rng), small()).a;
    auto [c0, c1] = coarse_interpolate(p0, p1, a, 0.0, false);
    EXPECT_EQ(vals(c0), vals(p0));
    auto [d0, d1] = coarse_interpolate(p0, p1, a, 1.0, false);
    EXPECT_EQ(vals(d1), vals(p1));
    EXPECT_THROW(coarse_interpolate(p0, p1, a, 1.5, false), ArgumentError);
    EXPECT_THROW(coarse_interpolate(p0, p1, a, -0.1, false), ArgumentError);
}

TEST(Interpolation, RenormalizedTransposeIsRowStochastic) {
    std::mt19937_64 rng(2);
    auto a = alignment(fd::random_param({9, 3}, rng), fd::random_param({9, 3}, rng), small()).a;
    const auto att = transposed_alignment(a, true);
    auto at = att.values();
    for (std::size_t i = 0; i < 9; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 9; ++j) s += at[i * 9 + j];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

class VariantWiring : public ::testing::Test {
protected:
    PointCloud p0 = random_cloud(24, 10), p1 = random_cloud(24, 11);

    InterpolationOutput<double> run(Variant v, double t = 0.3) {
        IdeaNet<double> net(small(v), 7);
        NoGradGuard ng;
        return net.forward(p0, p1, t, Mode::eval);
    }
};

TEST_F(VariantWiring, NoCompensationHasZeroDelta) {
    auto o = run(Variant::e_no_compensation);
    for (double v : o.delta_0.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(vals(o.o_0), vals(o.coarse_0));
}

TEST_F(VariantWiring, DirectRegressionHasZeroCoarse) {
    auto o = run(Variant::d_direct_regress);
    for (double v : o.coarse_1.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(vals(o.o_1), vals(o.delta_1));
}

TEST_F(VariantWiring, NoLinearUsesRawEndpoints) {
    auto o = run(Variant::c_no_linear);
    EXPECT_EQ(vals(o.coarse_0), vals(to_tensor<double>(p0)));
    EXPECT_EQ(vals(o.coarse_1), vals(to_tensor<double>(p1)));
}

TEST_F(VariantWiring, RandomPermutationIsFrozen) {
    auto o1 = run(Variant::a_random_perm), o2 = run(Variant::a_random_perm);
    EXPECT_EQ(vals(o1.alignment.a), vals(o2.alignment.a));
    auto a = o1.alignment.a.values();
    for (std::size_t i = 0; i < 24; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 24; ++j) {
            EXPECT_TRUE(a[i * 24 + j] == 0.0 || a[i * 24 + j] == 1.0);
            s += a[i * 24 + j];
        }
        EXPECT_EQ(s, 1.0);
    }
}

TEST_F(VariantWiring, CoordinateAlignmentIgnoresFeatures) {
    IdeaNet<double> n1(small(Variant::b_coord_distance), 1), n2(small(Variant::b_coord_distance), 2);
    NoGradGuard ng;
    auto a1 = n1.forward(p0, p1, 0.3, Mode::eval).alignment.a;
    auto a2 = n2.forward(p0, p1, 0.3, Mode::eval).alignment.a;
    EXPECT_EQ(vals(a1), vals(a2));
}

TEST_F(VariantWiring, PickedBranchFollowsTime) {
    auto early = run(Variant::full, 0.49), mid = run(Variant::full, 0.5);
    EXPECT_EQ(vals(early.picked), vals(early.o_0));
    EXPECT_EQ(vals(mid.picked), vals(mid.o_1));
    auto single = run(Variant::f_single_branch, 0.8);
    EXPECT_TRUE(single.single_branch);
    EXPECT_EQ(vals(single.picked), vals(single.o_0));
}

TEST_F(VariantWiring, CompensationIsBounded) {
    auto o = run(Variant::full);
    for (double v : o.delta_0.values()) EXPECT_LT(std::abs(v), 1.0);
}

TEST_F(VariantWiring, ZeroInitDeltaStartsAtCoarse) {
    ModelConfig c = small();
    c.zero_init_delta = true;
    IdeaNet<double> net(c, 3);
    NoGradGuard ng;
    auto o = net.forward(p0, p1, 0.3, Mode::eval);
    for (double v : o.delta_0.values()) EXPECT_EQ(v, 0.0);
}

TEST(Interpolate, OutputIsCoarsePlusDeltaInInputUnits) {
    IdeaNet<double> net(small(), 2);
    auto p0 = random_cloud(30, 1), p1 = random_cloud(30, 2);
    for (auto& p : p1.points) p[0] += 5;
    auto r = interpolate(net, p0, p1, 0.7);
    for (std::size_t i = 0; i < 30; ++i)
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(r.o_1[i][c], r.coarse_1[i][c] + r.delta_1[i][c]);
            EXPECT_EQ(r.picked[i][c], r.o_1[i][c]);
        }
    EXPECT_EQ(r.alignment.size(), 900u);
}

TEST(Interpolate, TranslationAndScaleEquivariant) {
    IdeaNet<double> net(small(), 2);
    auto p0 = random_cloud(30, 1), p1 = random_cloud(30, 2);
    auto r = interpolate(net, p0, p1, 0.4);
    auto move = [](PointCloud c) {
        for (auto& p : c.points) p = {3 * p[0] + 1, 3 * p[1] - 2, 3 * p[2] + 0.5};
        return c;
    };
    auto rm = interpolate(net, move(p0), move(p1), 0.4);
    auto want = move(r.picked);
    for (std::size_t i = 0; i < 30; ++i)
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(rm.picked[i][c], want[i][c], 1e-9);
}

TEST(Interpolate, RejectsBadInput) {
    IdeaNet<double> net(small(), 2);
    EXPECT_THROW(interpolate(net, random_cloud(30, 1), random_cloud(31, 2), 0.5), ArgumentError);
    EXPECT_THROW(interpolate(net, random_cloud(30, 1), random_cloud(30, 2), 2.0), ArgumentError);
}

TEST(IdeaNetState, ExportImportReproducesOutputs) {
    IdeaNet<float> a(small(), 1), b(small(), 2);
    b.import_state(a.export_state());
    auto p0 = random_cloud(20, 3), p1 = random_cloud(20, 4);
    auto ra = interpolate(a, p0, p1, 0.25), rb = interpolate(b, p0, p1, 0.25);
    EXPECT_EQ(ra.picked.points, rb.picked.points);
    EXPECT_EQ(a.export_state(), b.export_state());
}

TEST(IdeaNetState, ShapeMismatchIsConfigError) {
    ModelConfig wide = small();
    wide.width_mult = 0.25;
    IdeaNet<float> a(small(), 1), b(wide, 1);
    EXPECT_THROW(b.import_state(a.export_state()), ConfigError);
    auto arrays = a.export_state();
    arrays.pop_back();
    EXPECT_THROW(a.import_state(arrays), ConfigError);
}

TEST(IdeaNetState, SameSeedSameWeights) {
    IdeaNet<float> a(small(), 42), b(small(), 42), c(small(), 43);
    EXPECT_EQ(a.export_state(), b.export_state());
    EXPECT_NE(a.export_state(), c.export_state());
}
