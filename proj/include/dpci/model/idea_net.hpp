#pragma once

#include <algorithm>
#include <array>
#include <memory>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "dpci/geometry/knn.hpp"
#include "dpci/geometry/normalize.hpp"
#include "dpci/model/config.hpp"
#include "dpci/model/layers.hpp"

namespace dpci {

/// Per-point embedding of one frame: [N, d] rows, d = local + global width.
template <typename T>
struct FeatureMatrix {
    Tensor<T> rows;
    int source = 0;  // frame 0 or 1
};

/// Row-stochastic soft correspondence from frame 0 rows to frame 1 rows.
template <typename T>
struct AlignmentMatrix {
    Tensor<T> a;             // final matrix, rows sum to 1
    Tensor<T> inverse_dist;  // 1 / (||f0_i - f1_j|| + eps); undefined for a fixed permutation
    Tensor<T> standardized;  // row-standardized inverse distances; same caveat
};

template <typename T>
struct InterpolationOutput {
    Tensor<T> coarse_0, coarse_1;
    Tensor<T> delta_0, delta_1;
    Tensor<T> o_0, o_1;
    Tensor<T> picked;
    AlignmentMatrix<T> alignment;
    double t = 0;
    bool single_branch = false;
};

/// Soft alignment from feature distances: inverse distance, row standardization,
/// row softmax. Has no learnable parameters of its own.
template <typename T>
AlignmentMatrix<T> alignment(const Tensor<T>& f0, const Tensor<T>& f1, const ModelConfig& cfg) {
    if (f0.shape() != f1.shape()) {
        throw DimensionError("alignment: feature shapes differ, " + shape_str(f0.shape()) + " vs " +
                             shape_str(f1.shape()));
    }
    AlignmentMatrix<T> out;
    out.inverse_dist = reciprocal(pairwise_distance(f0, f1), static_cast<T>(cfg.eps_dist));
    out.standardized = row_standardize(out.inverse_dist, static_cast<T>(cfg.eps_std));
    out.a = row_softmax(out.standardized);
    return out;
}

template <typename T>
Tensor<T> transposed_alignment(const Tensor<T>& a, bool renormalize) {
    Tensor<T> at = transpose(a);
    return renormalize ? row_normalize_sum(at) : at;
}

namespace detail {
inline void check_time(double t, const char* op) {
    if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError(std::string(op) + ": t = " + std::to_string(t) + " outside [0, 1]");
}

/// (1 - t) * x + t * y, with exact copies at the endpoints.
template <typename T>
Tensor<T> lerp(const Tensor<T>& x, const Tensor<T>& y, double t) {
    if (t == 0.0) return add(x, scale(y, T{0}));
    if (t == 1.0) return add(scale(x, T{0}), y);
    return add(scale(x, static_cast<T>(1.0 - t)), scale(y, static_cast<T>(t)));
}
}  // namespace detail

/// Coarse frames P_{0->t} = (1-t) P0 + t A P1 and P_{1->t} = (1-t) A' P0 + t P1,
/// where A' is A transposed (optionally row-renormalized).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> coarse_interpolate(const Tensor<T>& p0, const Tensor<T>& p1, const Tensor<T>& a,
                                                   double t, bool renormalize_transpose = false) {
    detail::check_time(t, "coarse_interpolate");
    Tensor<T> at = transposed_alignment(a, renormalize_transpose);
    return {detail::lerp(p0, matmul(a, p1), t), detail::lerp(matmul(at, p0), p1, t)};
}

/// Same linear blend in feature space.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> fuse_features(const Tensor<T>& f0, const Tensor<T>& f1, const Tensor<T>& a, double t,
                                              bool renormalize_transpose = false) {
    detail::check_time(t, "fuse_features");
    if (f0.shape() != f1.shape()) throw DimensionError("fuse_features: feature shapes differ");
    Tensor<T> at = transposed_alignment(a, renormalize_transpose);
    return {detail::lerp(f0, matmul(a, f1), t), detail::lerp(matmul(at, f0), f1, t)};
}

/// Dense N x N permutation matrix with ones at (i, perm[i]).
template <typename T>
Tensor<T> permutation_matrix(const std::vector<std::uint32_t>& perm) {
    const std::size_t n = perm.size();
    std::vector<T> v(n * n, T{0});
    for (std::size_t i = 0; i < n; ++i) v[i * n + perm[i]] = T{1};
    return Tensor<T>({n, n}, std::move(v));
}

/// The interpolation network: shared EdgeConv embedding, feature-distance alignment,
/// coarse linear interpolation and a shared compensation MLP, run as two branches.
template <typename T>
class IdeaNet {
public:
    IdeaNet(ModelConfig cfg, std::uint64_t seed) : s_(std::make_unique<State>()) {
        cfg.validate();
        s_->cfg = cfg;
        std::mt19937_64 rng(seed);
        const bool nrm = cfg.use_norm;
        std::size_t in = 3;
        for (int l = 0; l < 4; ++l) {
            const std::size_t out = cfg.width(ModelConfig::kEdgeWidths[l]);
            s_->edge[l] = Dense<T>::make(2 * in, out, nrm, rng);
            s_->edge_widths[l] = out;
            in = out;
        }
        std::size_t concat = 0;
        for (auto w : s_->edge_widths) concat += w;
        const std::size_t fuse = cfg.width(ModelConfig::kFuseWidth);
        s_->fuse = Dense<T>::make(concat, fuse, nrm, rng);
        std::size_t h_in = fuse + 2 * fuse;
        for (int l = 0; l < 3; ++l) {
            const std::size_t out = cfg.width(ModelConfig::kHeadWidths[l]);
            s_->head[l] = Dense<T>::make(h_in, out, nrm, rng);
            h_in = out;
        }
        std::size_t c_in = cfg.feature_width();
        for (int l = 0; l < 3; ++l) {
            const std::size_t out = cfg.width(ModelConfig::kCompWidths[l]);
            s_->comp[l] = Dense<T>::make(c_in, out, nrm, rng);
            c_in = out;
        }
        s_->comp_out = Dense<T>::make(c_in, 3, false, rng);
        if (cfg.zero_init_delta) {
            for (auto& w : s_->comp_out.weight.mutable_values()) w = T{0};
            for (auto& b : s_->comp_out.bias.mutable_values()) b = T{0};
        }

        auto& st = s_->store;
        for (int l = 0; l < 4; ++l) s_->edge[l].register_in(st, "embed.edge" + std::to_string(l + 1));
        s_->fuse.register_in(st, "embed.fuse");
        for (int l = 0; l < 3; ++l) s_->head[l].register_in(st, "embed.head" + std::to_string(l + 1));
        for (int l = 0; l < 3; ++l) s_->comp[l].register_in(st, "comp.fc" + std::to_string(l + 1));
        s_->comp_out.register_in(st, "comp.out");
        for_each_layer([&](Dense<T>& d) { d.set_norm_options(cfg.norm_momentum, cfg.norm_eps, cfg.norm_instance_stats); });
    }

    const ModelConfig& config() const { return s_->cfg; }
    ParamStore<T>& params() { return s_->store; }
    const ParamStore<T>& params() const { return s_->store; }

    /// EdgeConv embedding of an [N, 3] frame into [N, feature_width].
    FeatureMatrix<T> embed(const Tensor<T>& points, Mode mode, int source = 0) {
        const auto& cfg = s_->cfg;
        const std::size_t n = points.dim(0);
        const std::size_t k = static_cast<std::size_t>(cfg.k_neighbors);
        if (n <= k) {
            throw ArgumentError("embed: N = " + std::to_string(n) + " must exceed k_neighbors = " + std::to_string(k));
        }
        const T slope = static_cast<T>(cfg.leaky_slope);
        IndexMatrix self_idx{n, k, std::vector<std::uint32_t>(n * k)};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) self_idx.idx[i * k + j] = static_cast<std::uint32_t>(i);

        Tensor<T> x = points;
        std::vector<Tensor<T>> levels;
        for (int l = 0; l < 4; ++l) {
            const std::size_t c = x.dim(1);
            // Graph is rebuilt from the current features before every block.
            IndexMatrix nbr = knn_indices(x, k);
            Tensor<T> xj = gather_neighbors(x, nbr);
            Tensor<T> xi = gather_neighbors(x, self_idx);
            Tensor<T> edge = reshape(concat_last<T>({xi, sub(xj, xi)}), {n * k, 2 * c});
            Tensor<T> h = leaky_relu(s_->edge[l](edge, mode), slope);
            x = max_over_neighbors(reshape(h, {n, k, s_->edge_widths[l]}));
            levels.push_back(x);
        }
        Tensor<T> x5 = leaky_relu(s_->fuse(concat_last(levels), mode), slope);
        Tensor<T> global = concat_last<T>({pool_points(x5, PoolKind::max), pool_points(x5, PoolKind::avg)});
        Tensor<T> y1 = broadcast_rows(global, n);
        Tensor<T> y2 = concat_last<T>({x5, y1});
        for (int l = 0; l < 3; ++l) y2 = leaky_relu(s_->head[l](y2, mode), slope);
        return {concat_last<T>({y2, y1}), source};
    }

    /// Per-point increments in (-1, 1)^3 from fused features.
    Tensor<T> compensate(const Tensor<T>& fused, Mode mode) {
        if (fused.rank() != 2 || fused.dim(1) != s_->cfg.feature_width()) {
            throw ConfigError("compensate: expected width " + std::to_string(s_->cfg.feature_width()) + ", got " +
                              shape_str(fused.shape()));
        }
        Tensor<T> h = fused;
        for (int l = 0; l < 3; ++l) h = relu(s_->comp[l](h, mode));
        return tanh(s_->comp_out(h, mode));
    }

    /// Alignment used by the configured variant.
    AlignmentMatrix<T> align(const Tensor<T>& f0, const Tensor<T>& f1, const Tensor<T>& p0, const Tensor<T>& p1) {
        const auto& cfg = s_->cfg;
        switch (cfg.variant) {
            case Variant::a_random_perm: {
                std::vector<std::uint32_t> perm(p0.dim(0));
                std::iota(perm.begin(), perm.end(), 0u);
                std::mt19937_64 rng(cfg.perm_seed);
                std::shuffle(perm.begin(), perm.end(), rng);
                return {permutation_matrix<T>(perm), {}, {}};
            }
            case Variant::b_coord_distance:
                return alignment(p0.detach(), p1.detach(), cfg);
            default:
                return alignment(f0, f1, cfg);
        }
    }

    /// Both branches on an already-normalized pair.
    InterpolationOutput<T> forward(const PointCloud& p0, const PointCloud& p1, double t, Mode mode) {
        detail::check_time(t, "forward");
        if (p0.size() != p1.size()) throw ArgumentError("forward: frames have different point counts");
        const auto& cfg = s_->cfg;
        Tensor<T> x0 = to_tensor<T>(p0), x1 = to_tensor<T>(p1);
        FeatureMatrix<T> f0 = embed(x0, mode, 0);
        FeatureMatrix<T> f1 = embed(x1, mode, 1);

        InterpolationOutput<T> out;
        out.t = t;
        out.single_branch = cfg.variant == Variant::f_single_branch;
        out.alignment = align(f0.rows, f1.rows, x0, x1);
        const Tensor<T>& a = out.alignment.a;
        auto [fused0, fused1] = fuse_features(f0.rows, f1.rows, a, t, cfg.renormalize_transpose);

        switch (cfg.variant) {
            case Variant::c_no_linear:
                out.coarse_0 = x0;
                out.coarse_1 = x1;
                break;
            case Variant::d_direct_regress:
                out.coarse_0 = Tensor<T>(x0.shape());
                out.coarse_1 = Tensor<T>(x1.shape());
                break;
            default: {
                auto [c0, c1] = coarse_interpolate(x0, x1, a, t, cfg.renormalize_transpose);
                out.coarse_0 = c0;
                out.coarse_1 = c1;
            }
        }
        if (cfg.variant == Variant::e_no_compensation) {
            out.delta_0 = Tensor<T>(x0.shape());
            out.delta_1 = Tensor<T>(x1.shape());
        } else {
            out.delta_0 = compensate(fused0, mode);
            out.delta_1 = compensate(fused1, mode);
        }
        out.o_0 = add(out.coarse_0, out.delta_0);
        out.o_1 = add(out.coarse_1, out.delta_1);
        out.picked = (out.single_branch || t < 0.5) ? out.o_0 : out.o_1;
        return out;
    }

    std::vector<NamedArray> export_state() const { return s_->store.export_arrays(); }
    void import_state(const std::vector<NamedArray>& arrays) { s_->store.import_arrays(arrays); }

private:
    template <typename Fn>
    void for_each_layer(Fn fn) {
        for (auto& d : s_->edge) fn(d);
        fn(s_->fuse);
        for (auto& d : s_->head) fn(d);
        for (auto& d : s_->comp) fn(d);
        fn(s_->comp_out);
    }

    // Heap-held so registered buffer pointers survive moves of the network.
    struct State {
        ModelConfig cfg;
        std::array<Dense<T>, 4> edge;
        std::array<std::size_t, 4> edge_widths{};
        Dense<T> fuse;
        std::array<Dense<T>, 3> head;
        std::array<Dense<T>, 3> comp;
        Dense<T> comp_out;
        ParamStore<T> store;
    };
    std::unique_ptr<State> s_;
};

/// Interpolation result mapped back to the input coordinates.
struct Interpolated {
    PointCloud picked;
    PointCloud coarse_0, coarse_1, delta_0, delta_1, o_0, o_1;
    std::vector<double> alignment;  // row-major N x N
    PairTransform transform;
};

/// Normalizes the pair, runs the network in eval mode without recording, and
/// de-normalizes. Increments are reported in the input units.
template <typename T>
Interpolated interpolate(IdeaNet<T>& net, const PointCloud& p0, const PointCloud& p1, double t) {
    NoGradGuard guard;
    NormalizedPair np = normalize_pair(p0, p1);
    auto out = net.forward(np.x, np.y, t, Mode::eval);
    Interpolated r;
    r.transform = np.transform;
    auto back = [&](const Tensor<T>& x) { return np.transform.invert(to_cloud(x)); };
    auto back_delta = [&](const Tensor<T>& x) {
        PointCloud d = to_cloud(x);
        for (auto& p : d.points)
            for (auto& c : p) c /= np.transform.scale;
        return d;
    };
    // Outputs are re-summed in input units so o == coarse + delta holds there too.
    auto sum = [](const PointCloud& a, const PointCloud& b) {
        PointCloud s = a;
        for (std::size_t i = 0; i < s.size(); ++i)
            for (int c = 0; c < 3; ++c) s[i][c] += b[i][c];
        return s;
    };
    r.coarse_0 = back(out.coarse_0);
    r.coarse_1 = back(out.coarse_1);
    r.delta_0 = back_delta(out.delta_0);
    r.delta_1 = back_delta(out.delta_1);
    r.o_0 = sum(r.coarse_0, r.delta_0);
    r.o_1 = sum(r.coarse_1, r.delta_1);
    r.picked = (out.single_branch || t < 0.5) ? r.o_0 : r.o_1;
    r.alignment.assign(out.alignment.a.values().begin(), out.alignment.a.values().end());
    return r;
}

}  // namespace dpci
