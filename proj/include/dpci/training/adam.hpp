#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dpci/model/layers.hpp"
#include "dpci/training/config.hpp"

namespace dpci {

/// First/second moments per parameter plus the shared step counter.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t step = 0;

    static AdamState make(const ParamStore<T>& store) {
        AdamState s;
        for (const auto& [name, t] : store.params()) {
            s.m.emplace_back(t.size(), T{});
            s.v.emplace_back(t.size(), T{});
        }
        return s;
    }
};

/// One bias-corrected Adam update at a constant learning rate. Parameters without a
/// gradient are treated as having a zero gradient.
template <typename T>
void adam_step(ParamStore<T>& store, AdamState<T>& state, const TrainConfig& cfg) {
    auto& params = store.params();
    if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& [name, t] = params[p];
        if (state.m[p].size() != t.size()) throw DimensionError("adam_step: state shape mismatch for " + name);
        if (t.has_grad()) {
            for (T g : t.grad()) {
                if (!std::isfinite(static_cast<double>(g))) {
                    throw NumericError("adam_step: non-finite gradient in parameter " + name);
                }
            }
        }
    }
    ++state.step;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& t = params[p].second;
        auto w = t.mutable_values();
        const bool has = t.has_grad();
        std::span<const T> g = has ? t.grad() : std::span<const T>{};
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const T gi = has ? g[i] : T{};
            m[i] = static_cast<T>(b1 * m[i] + (1 - b1) * gi);
            v[i] = static_cast<T>(b2 * v[i] + (1 - b2) * gi * gi);
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            const double upd = cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            if (upd != 0) w[i] = static_cast<T>(w[i] - upd);
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
    double sq = 0;
    for (auto& [name, t] : store.params())
        if (t.has_grad())
            for (T g : t.grad()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const T f = static_cast<T>(max_norm / norm);
        for (auto& [name, t] : store.params())
            if (t.has_grad())
                for (auto& g : t.mutable_grad()) g *= f;
    }
    return norm;
}

}  // namespace dpci
