#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dpci/data/synthetic.hpp"
#include "dpci/training/loss.hpp"

namespace dpci {

struct GradcheckOptions {
    std::size_t n_points = 32;
    double width_mult = 0.125;
    std::size_t samples = 128;  // parameter scalars probed
    double step = 1e-6;         // central-difference half step
    double floor = 1e-5;        // denominator floor; differences below ~1e-10 are roundoff
    std::uint64_t seed = 0;
};

struct GradcheckEntry {
    std::string param;
    std::size_t index;
    double analytic;
    double numeric;
    double rel_error;
};

struct GradcheckResult {
    std::vector<GradcheckEntry> entries;
    double max_rel_error = 0;
    std::size_t param_scalars = 0;
    double seconds = 0;
};

/// Compares back-propagated gradients of the dual-branch loss with central finite
/// differences on a seeded sine-motion pair, in double precision. The relative error
/// is |a - n| / max(|a|, |n|, floor).
inline GradcheckResult gradcheck(const GradcheckOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec;
    spec.kind = MotionKind::sine;
    spec.n_points = opt.n_points;
    spec.n_frames = 3;
    spec.seed = opt.seed;
    spec.amplitude = 0.2;
    auto [seq, truth] = gen_synthetic(spec);
    NormalizedPair np = normalize_pair(seq.frames[0], seq.frames[2]);
    const PointCloud target = np.transform.apply(seq.frames[1]);

    ModelConfig mcfg;
    mcfg.width_mult = opt.width_mult;
    mcfg.k_neighbors = static_cast<int>(std::min<std::size_t>(20, opt.n_points - 1));
    IdeaNet<double> net(mcfg, opt.seed);
    // Train mode: the normalization uses batch statistics, so the loss is a smooth
    // function of every weight; running-stat updates do not feed back.
    auto loss = [&]() {
        auto out = net.forward(np.x, np.y, 0.5, Mode::train);
        return dual_loss(out, target).total;
    };

    net.params().zero_grad();
    backward(loss());

    auto& params = net.params().params();
    GradcheckResult res;
    res.param_scalars = net.params().scalar_count();
    std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
    // Round-robin over tensors so every layer is probed.
    std::vector<std::pair<std::size_t, std::size_t>> probes;
    for (std::size_t s = 0; probes.size() < opt.samples; ++s) {
        const std::size_t p = s % params.size();
        std::uniform_int_distribution<std::size_t> pick(0, params[p].second.size() - 1);
        probes.emplace_back(p, pick(rng));
    }
    for (auto [p, i] : probes) {
        auto& [name, t] = params[p];
        const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
        auto v = t.mutable_values();
        const double orig = v[i];
        double f[2];
        {
            NoGradGuard ng;
            v[i] = orig + opt.step;
            f[0] = loss().item();
            v[i] = orig - opt.step;
            f[1] = loss().item();
        }
        v[i] = orig;
        const double numeric = (f[0] - f[1]) / (2 * opt.step);
        const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), opt.floor});
        res.entries.push_back({name, i, analytic, numeric, rel});
        res.max_rel_error = std::max(res.max_rel_error, rel);
    }
    net.params().zero_grad();
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace dpci
