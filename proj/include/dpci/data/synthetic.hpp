#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dpci/data/sequence.hpp"

namespace dpci {

enum class MotionKind { translate, rotate, sine };
enum class ShapeKind { cube, sphere };

inline const char* motion_name(MotionKind k) {
    switch (k) {
        case MotionKind::translate: return "translate";
        case MotionKind::rotate: return "rotate";
        case MotionKind::sine: return "sine";
    }
    return "?";
}
inline MotionKind parse_motion(const std::string& s) {
    if (s == "translate") return MotionKind::translate;
    if (s == "rotate") return MotionKind::rotate;
    if (s == "sine") return MotionKind::sine;
    throw ArgumentError("unknown motion kind '" + s + "'");
}
inline const char* shape_name(ShapeKind k) { return k == ShapeKind::cube ? "cube" : "sphere"; }
inline ShapeKind parse_shape(const std::string& s) {
    if (s == "cube") return ShapeKind::cube;
    if (s == "sphere") return ShapeKind::sphere;
    throw ArgumentError("unknown shape '" + s + "'");
}

struct SyntheticSpec {
    MotionKind kind = MotionKind::translate;
    std::size_t n_points = 64;
    std::size_t n_frames = 9;
    ShapeKind shape = ShapeKind::cube;
    bool shuffle_frames = false;
    std::uint64_t seed = 0;
    double size = 1.0;  // cube edge / sphere diameter, centered at the origin

    Point3 velocity{1.0, 0.0, 0.0};  // translate: offset reached at the last frame
    Point3 axis{0.0, 0.0, 1.0};      // rotate
    double angle = std::numbers::pi / 2;
    double amplitude = 0.1;          // sine: radial displacement amplitude
    Point3 wave{1.0, 0.0, 0.0};      // sine: phase_i = 2 pi <base_i, wave>
};

/// Ground truth for a generated sequence: closed-form trajectories plus the row
/// permutation applied to each frame.
struct SyntheticTruth {
    SyntheticSpec spec;
    std::vector<Point3> base;
    std::vector<double> phase;
    std::vector<Point3> direction;
    // correspondences[f][row] = trajectory id stored at that row of frame f.
    std::vector<std::vector<std::uint32_t>> correspondences;

    double frame_time(std::size_t f) const {
        return spec.n_frames > 1 ? static_cast<double>(f) / static_cast<double>(spec.n_frames - 1) : 0.0;
    }

    Point3 trajectory(std::size_t id, double tau) const {
        const Point3& b = base[id];
        switch (spec.kind) {
            case MotionKind::translate:
                return {b[0] + spec.velocity[0] * tau, b[1] + spec.velocity[1] * tau, b[2] + spec.velocity[2] * tau};
            case MotionKind::rotate: {
                Point3 k = spec.axis;
                const double nk = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                for (auto& c : k) c /= nk;
                const double th = spec.angle * tau, cs = std::cos(th), sn = std::sin(th);
                const double kd = k[0] * b[0] + k[1] * b[1] + k[2] * b[2];
                const Point3 kxb{k[1] * b[2] - k[2] * b[1], k[2] * b[0] - k[0] * b[2], k[0] * b[1] - k[1] * b[0]};
                Point3 r;
                for (int c = 0; c < 3; ++c) r[c] = b[c] * cs + kxb[c] * sn + k[c] * kd * (1 - cs);
                return r;
            }
            case MotionKind::sine: {
                const double s = spec.amplitude * std::sin(2 * std::numbers::pi * tau + phase[id]);
                const Point3& d = direction[id];
                return {b[0] + s * d[0], b[1] + s * d[1], b[2] + s * d[2]};
            }
        }
        return b;
    }

    /// Row of frame f1 holding the trajectory stored at `row` of frame f0.
    std::uint32_t correspondent(std::size_t f0, std::size_t f1, std::size_t row) const {
        const std::uint32_t id = correspondences.at(f0).at(row);
        const auto& target = correspondences.at(f1);
        return static_cast<std::uint32_t>(std::find(target.begin(), target.end(), id) - target.begin());
    }
};

namespace detail {
inline std::vector<Point3> sample_surface(ShapeKind shape, std::size_t n, double size, std::mt19937_64& rng) {
    std::vector<Point3> pts(n);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    if (shape == ShapeKind::cube) {
        std::uniform_int_distribution<int> face(0, 5);
        for (auto& p : pts) {
            const int f = face(rng);
            const int axis = f / 2;
            p = {u(rng), u(rng), u(rng)};
            p[axis] = (f % 2 == 0) ? -0.5 : 0.5;
            for (auto& c : p) c *= size;
        }
    } else {
        std::normal_distribution<double> g(0.0, 1.0);
        for (auto& p : pts) {
            double r = 0;
            do {
                p = {g(rng), g(rng), g(rng)};
                r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            } while (r < 1e-12);
            for (auto& c : p) c = c / r * 0.5 * size;
        }
    }
    return pts;
}
}  // namespace detail

/// Generates a sequence whose points follow closed-form trajectories.
inline std::pair<Sequence, SyntheticTruth> gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n_points < 8) throw ArgumentError("gen_synthetic: need at least 8 points");
    if (spec.n_frames < 1) throw ArgumentError("gen_synthetic: need at least one frame");
    std::mt19937_64 rng(spec.seed);
    SyntheticTruth truth;
    truth.spec = spec;
    truth.base = detail::sample_surface(spec.shape, spec.n_points, spec.size, rng);
    truth.phase.resize(spec.n_points);
    truth.direction.resize(spec.n_points);
    for (std::size_t i = 0; i < spec.n_points; ++i) {
        const Point3& b = truth.base[i];
        truth.phase[i] = 2 * std::numbers::pi * (b[0] * spec.wave[0] + b[1] * spec.wave[1] + b[2] * spec.wave[2]);
        const double r = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        truth.direction[i] = r > 0 ? Point3{b[0] / r, b[1] / r, b[2] / r} : Point3{1, 0, 0};
    }

    Sequence seq;
    seq.name = std::string(motion_name(spec.kind)) + "_" + shape_name(spec.shape);
    seq.frames.resize(spec.n_frames);
    truth.correspondences.resize(spec.n_frames);
    for (std::size_t f = 0; f < spec.n_frames; ++f) {
        auto& ids = truth.correspondences[f];
        ids.resize(spec.n_points);
        std::iota(ids.begin(), ids.end(), 0u);
        if (spec.shuffle_frames) std::shuffle(ids.begin(), ids.end(), rng);
        const double tau = truth.frame_time(f);
        seq.frames[f].points.resize(spec.n_points);
        for (std::size_t r = 0; r < spec.n_points; ++r) seq.frames[f][r] = truth.trajectory(ids[r], tau);
    }
    return {std::move(seq), std::move(truth)};
}

/// Fraction of rows whose argmax (first on ties) hits the true correspondent.
template <typename Matrix>
double alignment_accuracy(const Matrix& a, std::size_t n, const SyntheticTruth* truth, std::size_t f0, std::size_t f1) {
    if (truth == nullptr) throw UnsupportedError("alignment_accuracy: needs synthetic ground truth");
    if (truth->correspondences.empty() || truth->correspondences.front().size() != n) {
        throw DimensionError("alignment_accuracy: matrix size does not match the synthetic sequence");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j)
            if (a[i * n + j] > a[i * n + best]) best = j;
        if (best == truth->correspondent(f0, f1, i)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace dpci
