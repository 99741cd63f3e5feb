#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dpci/core/checkpoint.hpp"
#include "dpci/core/ops.hpp"

namespace dpci {

/// Registry of learnable tensors and non-learnable buffers, in creation order.
template <typename T>
class ParamStore {
public:
    void add_param(std::string name, Tensor<T> t) { params_.emplace_back(std::move(name), std::move(t)); }
    void add_buffer(std::string name, std::vector<T>* buf) { buffers_.emplace_back(std::move(name), buf); }

    std::vector<std::pair<std::string, Tensor<T>>>& params() { return params_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& params() const { return params_; }

    const Tensor<T>& param(const std::string& name) const {
        for (const auto& [n, t] : params_)
            if (n == name) return t;
        throw ArgumentError("no parameter named " + name);
    }

    std::size_t scalar_count() const {
        std::size_t s = 0;
        for (const auto& [n, t] : params_) s += t.size();
        return s;
    }

    void zero_grad() {
        for (auto& [n, t] : params_) t.zero_grad();
    }

    std::vector<NamedArray> export_arrays() const {
        std::vector<NamedArray> out;
        for (const auto& [n, t] : params_) {
            out.push_back({n, t.shape(), std::vector<float>(t.values().begin(), t.values().end())});
        }
        for (const auto& [n, b] : buffers_) {
            out.push_back({n, Shape{b->size()}, std::vector<float>(b->begin(), b->end())});
        }
        return out;
    }

    /// Loads every registered entry by name; extra entries in `arrays` are ignored.
    void import_arrays(const std::vector<NamedArray>& arrays) {
        auto find = [&](const std::string& name) -> const NamedArray& {
            for (const auto& a : arrays)
                if (a.name == name) return a;
            throw ConfigError("checkpoint is missing entry " + name);
        };
        for (auto& [n, t] : params_) {
            const auto& a = find(n);
            if (a.shape != t.shape()) {
                throw ConfigError("checkpoint entry " + n + " has shape " + shape_str(a.shape) + ", model expects " +
                                  shape_str(t.shape()));
            }
            auto dst = t.mutable_values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a.data[i]);
        }
        for (auto& [n, b] : buffers_) {
            const auto& a = find(n);
            if (a.data.size() != b->size()) throw ConfigError("checkpoint buffer " + n + " has the wrong length");
            for (std::size_t i = 0; i < b->size(); ++i) (*b)[i] = static_cast<T>(a.data[i]);
        }
    }

private:
    std::vector<std::pair<std::string, Tensor<T>>> params_;
    std::vector<std::pair<std::string, std::vector<T>*>> buffers_;
};

/// Shared per-point linear map (a 1x1 convolution), optionally followed by channel
/// normalization. Without normalization the layer carries its own bias.
template <typename T>
struct Dense {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [1, out]; undefined when normalized
    std::optional<NormState<T>> norm;

    static Dense make(std::size_t in, std::size_t out, bool normalized, std::mt19937_64& rng) {
        Dense d;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        std::vector<T> w(in * out);
        for (auto& x : w) x = static_cast<T>(u(rng));
        d.weight = Tensor<T>::parameter({in, out}, std::move(w));
        if (normalized) {
            d.norm = NormState<T>::make(out);
        } else {
            std::vector<T> b(out);
            for (auto& x : b) x = static_cast<T>(u(rng));
            d.bias = Tensor<T>::parameter({1, out}, std::move(b));
        }
        return d;
    }

    void set_norm_options(double momentum, double eps, bool instance_stats) {
        if (norm) {
            norm->momentum = momentum;
            norm->eps = eps;
            norm->instance_stats = instance_stats;
        }
    }

    void register_in(ParamStore<T>& store, const std::string& prefix) {
        store.add_param(prefix + ".weight", weight);
        if (bias.defined()) store.add_param(prefix + ".bias", bias);
        if (norm) {
            store.add_param(prefix + ".norm.gamma", norm->gamma);
            store.add_param(prefix + ".norm.beta", norm->beta);
            store.add_buffer(prefix + ".norm.running_mean", &norm->running_mean);
            store.add_buffer(prefix + ".norm.running_var", &norm->running_var);
        }
    }

    /// x: [M, in] -> [M, out]
    Tensor<T> operator()(const Tensor<T>& x, Mode mode) {
        Tensor<T> y = matmul(x, weight);
        if (bias.defined()) y = add_row(y, bias);
        if (norm) y = channel_norm(y, *norm, mode);
        return y;
    }
};

}  // namespace dpci
