#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dpci/core/parallel.hpp"
#include "dpci/core/tensor.hpp"

namespace dpci {

/// Row-major N x k table of neighbor indices.
struct IndexMatrix {
    std::size_t rows = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> idx;

    std::uint32_t operator()(std::size_t i, std::size_t j) const { return idx[i * k + j]; }
};

enum class Activation { relu, leaky_relu, tanh };
enum class PoolKind { max, avg };

/// Per-channel affine normalization state. gamma/beta are learnable leaves.
template <typename T>
struct NormState {
    Tensor<T> gamma;
    Tensor<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    bool instance_stats = false;  // normalize by the input's own statistics in eval mode too

    static NormState make(std::size_t channels) {
        NormState s;
        s.gamma = Tensor<T>::parameter({1, channels}, std::vector<T>(channels, T{1}));
        s.beta = Tensor<T>::parameter({1, channels}, std::vector<T>(channels, T{0}));
        s.running_mean.assign(channels, T{0});
        s.running_var.assign(channels, T{1});
        return s;
    }
};

namespace detail {

inline std::size_t lead_rows(const Shape& s) {
    if (s.empty()) return 1;
    std::size_t r = 1;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
    return r;
}
inline std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

inline void require_rank(const Shape& s, std::size_t r, const char* op) {
    if (s.size() != r) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " + shape_str(s));
    }
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank(a.shape(), 2, "matmul");
    detail::require_rank(b.shape(), 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    std::vector<T> out(m * n, T{});
    const T* A = a.values().data();
    const T* B = b.values().data();
    parallel_for(m, 16, [&](std::size_t i) {
        T* c = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = A[i * k + p];
            if (av == T{}) continue;
            const T* br = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * br[j];
        }
    });
    return detail::record<T>({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node<T>& self) {
        const T* G = self.grad.data();
        const T* A = self.parents[0]->value.data();
        const T* B = self.parents[1]->value.data();
        if (auto* ga = detail::parent_grad(self, 0)) {
            T* dA = ga->data();
            parallel_for(m, 16, [&](std::size_t i) {
                for (std::size_t p = 0; p < k; ++p) {
                    T s{};
                    const T* br = B + p * n;
                    const T* gr = G + i * n;
                    for (std::size_t j = 0; j < n; ++j) s += gr[j] * br[j];
                    dA[i * k + p] += s;
                }
            });
        }
        if (auto* gb = detail::parent_grad(self, 1)) {
            T* dB = gb->data();
            parallel_for(k, 16, [&](std::size_t p) {
                T* db = dB + p * n;
                for (std::size_t i = 0; i < m; ++i) {
                    const T av = A[i * k + p];
                    if (av == T{}) continue;
                    const T* gr = G + i * n;
                    for (std::size_t j = 0; j < n; ++j) db[j] += av * gr[j];
                }
            });
        }
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    detail::require_rank(a.shape(), 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<T> out(m * n);
    auto v = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
    return detail::record<T>({n, m}, std::move(out), {a}, [m, n](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same(a, b, "add");
    std::vector<T> out(a.values().begin(), a.values().end());
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return detail::record<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        for (std::size_t p = 0; p < 2; ++p)
            if (auto* g = detail::parent_grad(self, p))
                for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same(a, b, "sub");
    std::vector<T> out(a.values().begin(), a.values().end());
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return detail::record<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        if (auto* g = detail::parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        if (auto* g = detail::parent_grad(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    });
}

/// Elementwise product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same(a, b, "mul");
    std::vector<T> out(a.size());
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return detail::record<T>(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        if (auto* g = detail::parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
        if (auto* g = detail::parent_grad(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> out(a.values().begin(), a.values().end());
    for (auto& x : out) x *= s;
    return detail::record<T>(a.shape(), std::move(out), {a}, [s](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

/// x[..., d] + b[1, d], broadcasting b over every row.
template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& b) {
    const std::size_t d = detail::last_dim(x.shape());
    if (b.size() != d) {
        throw DimensionError("add_row: bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
    }
    const std::size_t rows = detail::lead_rows(x.shape());
    std::vector<T> out(x.values().begin(), x.values().end());
    auto bv = b.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] += bv[c];
    return detail::record<T>(x.shape(), std::move(out), {x, b}, [rows, d](detail::Node<T>& self) {
        if (auto* g = detail::parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        if (auto* g = detail::parent_grad(self, 1))
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < d; ++c) (*g)[c] += self.grad[r * d + c];
    });
}

/// Repeats a [1, d] row n times.
template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& x, std::size_t n) {
    const std::size_t d = x.size();
    std::vector<T> out(n * d);
    auto v = x.values();
    for (std::size_t r = 0; r < n; ++r) std::copy(v.begin(), v.end(), out.begin() + r * d);
    return detail::record<T>({n, d}, std::move(out), {x}, [n, d](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[r * d + c];
    });
}

/// Concatenation along the last axis; all leading dimensions must agree.
template <typename T>
Tensor<T> concat_last(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_last: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape l = p.shape();
        std::size_t w = l.back();
        l.pop_back();
        if (l != lead) throw DimensionError("concat_last: leading shape mismatch " + shape_str(p.shape()));
        widths.push_back(w);
        total += w;
    }
    const std::size_t rows = shape_size(lead);
    std::vector<T> out(rows * total);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto v = parts[k].values();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(v.begin() + r * widths[k], widths[k], out.begin() + r * total + off);
        off += widths[k];
    }
    Shape shape = lead;
    shape.push_back(total);
    return detail::record<T>(shape, std::move(out), parts, [rows, total, widths](detail::Node<T>& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (auto* g = detail::parent_grad(self, k)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c)
                        (*g)[r * widths[k] + c] += self.grad[r * total + off + c];
            }
            off += widths[k];
        }
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    std::vector<T> out(x.values().begin(), x.values().end());
    return detail::record<T>(std::move(shape), std::move(out), {x}, [](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

/// Elementwise activation. The leaky/relu derivative at exactly 0 is the negative-side slope.
template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind, T slope = T(0.2)) {
    if (kind == Activation::leaky_relu && !std::isfinite(static_cast<double>(slope))) {
        throw ArgumentError("leaky_relu slope must be finite");
    }
    std::vector<T> out(x.size());
    auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        switch (kind) {
            case Activation::relu: out[i] = v[i] > T{} ? v[i] : T{}; break;
            case Activation::leaky_relu: out[i] = v[i] > T{} ? v[i] : slope * v[i]; break;
            case Activation::tanh: out[i] = std::tanh(v[i]); break;
        }
    }
    return detail::record<T>(x.shape(), std::move(out), {x}, [kind, slope](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        const auto& in = self.parents[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i) {
            T d{};
            switch (kind) {
                case Activation::relu: d = in[i] > T{} ? T{1} : T{0}; break;
                case Activation::leaky_relu: d = in[i] > T{} ? T{1} : slope; break;
                case Activation::tanh: d = T{1} - self.value[i] * self.value[i]; break;
            }
            g[i] += d * self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return activate(x, Activation::relu);
}
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    return activate(x, Activation::leaky_relu, slope);
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    return activate(x, Activation::tanh);
}

/// Softmax over each row of an [m, n] matrix, max-subtracted.
template <typename T>
Tensor<T> row_softmax(const Tensor<T>& x) {
    detail::require_rank(x.shape(), 2, "row_softmax");
    const std::size_t m = x.dim(0), n = x.dim(1);
    auto v = x.values();
    std::vector<T> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const T* row = v.data() + i * n;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(row[j])) throw NumericError("row_softmax: NaN in row " + std::to_string(i));
            mx = std::max(mx, row[j]);
        }
        T s{};
        for (std::size_t j = 0; j < n; ++j) s += (out[i * n + j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= s;
    }
    return detail::record<T>({m, n}, std::move(out), {x}, [m, n](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < m; ++i) {
            const T* y = self.value.data() + i * n;
            const T* gy = self.grad.data() + i * n;
            T dot{};
            for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
        }
    });
}

/// (x - mean_i) / (std_i + eps) per row, population standard deviation.
template <typename T>
Tensor<T> row_standardize(const Tensor<T>& x, T eps) {
    detail::require_rank(x.shape(), 2, "row_standardize");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (n < 2) throw DimensionError("row_standardize: rows need at least 2 entries");
    auto v = x.values();
    std::vector<T> out(m * n);
    std::vector<T> sigma(m);
    for (std::size_t i = 0; i < m; ++i) {
        const T* row = v.data() + i * n;
        T mu{};
        for (std::size_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<T>(n);
        T var{};
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        sigma[i] = std::sqrt(var / static_cast<T>(n));
        const T s = sigma[i] + eps;
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = s > T{} ? (row[j] - mu) / s : T{};
    }
    return detail::record<T>({m, n}, std::move(out), {x}, [m, n, eps, sigma](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        const auto& in = self.parents[0]->value;
        for (std::size_t i = 0; i < m; ++i) {
            const T s = sigma[i] + eps;
            if (!(s > T{})) continue;
            const T* row = in.data() + i * n;
            const T* gy = self.grad.data() + i * n;
            T mu{}, gsum{}, gc{};
            for (std::size_t j = 0; j < n; ++j) mu += row[j];
            mu /= static_cast<T>(n);
            for (std::size_t j = 0; j < n; ++j) {
                gsum += gy[j];
                gc += gy[j] * (row[j] - mu);
            }
            const T gmean = gsum / static_cast<T>(n);
            const T k = sigma[i] > T{} ? gc / (static_cast<T>(n) * sigma[i] * s * s) : T{};
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += (gy[j] - gmean) / s - k * (row[j] - mu);
        }
    });
}

/// Divides each row by its sum.
template <typename T>
Tensor<T> row_normalize_sum(const Tensor<T>& x) {
    detail::require_rank(x.shape(), 2, "row_normalize_sum");
    const std::size_t m = x.dim(0), n = x.dim(1);
    auto v = x.values();
    std::vector<T> out(m * n);
    std::vector<T> sums(m);
    for (std::size_t i = 0; i < m; ++i) {
        T s{};
        for (std::size_t j = 0; j < n; ++j) s += v[i * n + j];
        if (!(s > T{})) throw NumericError("row_normalize_sum: non-positive row sum at row " + std::to_string(i));
        sums[i] = s;
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = v[i * n + j] / s;
    }
    return detail::record<T>({m, n}, std::move(out), {x}, [m, n, sums](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < m; ++i) {
            T dot{};
            for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += (self.grad[i * n + j] - dot) / sums[i];
        }
    });
}

/// Max or mean over the point axis of [N, d]; max ties route to the first argmax.
template <typename T>
Tensor<T> pool_points(const Tensor<T>& x, PoolKind kind) {
    detail::require_rank(x.shape(), 2, "pool_points");
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (n == 0) throw DimensionError("pool_points: empty point set");
    auto v = x.values();
    std::vector<T> out(d);
    std::vector<std::uint32_t> arg(kind == PoolKind::max ? d : 0);
    for (std::size_t c = 0; c < d; ++c) {
        if (kind == PoolKind::max) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (v[i * d + c] > v[best * d + c]) best = i;
            out[c] = v[best * d + c];
            arg[c] = static_cast<std::uint32_t>(best);
        } else {
            T s{};
            for (std::size_t i = 0; i < n; ++i) s += v[i * d + c];
            out[c] = s / static_cast<T>(n);
        }
    }
    return detail::record<T>({1, d}, std::move(out), {x}, [n, d, kind, arg](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t c = 0; c < d; ++c) {
            if (kind == PoolKind::max) {
                g[arg[c] * d + c] += self.grad[c];
            } else {
                const T share = self.grad[c] / static_cast<T>(n);
                for (std::size_t i = 0; i < n; ++i) g[i * d + c] += share;
            }
        }
    });
}

/// out[i, j, :] = x[idx(i, j), :]; backward scatter-adds.
template <typename T>
Tensor<T> gather_neighbors(const Tensor<T>& x, const IndexMatrix& idx) {
    detail::require_rank(x.shape(), 2, "gather_neighbors");
    const std::size_t n = x.dim(0), d = x.dim(1), rows = idx.rows, k = idx.k;
    for (auto j : idx.idx) {
        if (j >= n) {
            throw IndexError("gather_neighbors: index " + std::to_string(j) + " out of range [0, " +
                             std::to_string(n) + ")");
        }
    }
    auto v = x.values();
    std::vector<T> out(rows * k * d);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < k; ++j)
            std::copy_n(v.begin() + idx(i, j) * d, d, out.begin() + (i * k + j) * d);
    return detail::record<T>({rows, k, d}, std::move(out), {x}, [idx, d](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t e = 0; e < idx.idx.size(); ++e) {
            const std::size_t src = idx.idx[e];
            for (std::size_t c = 0; c < d; ++c) g[src * d + c] += self.grad[e * d + c];
        }
    });
}

/// Max over the neighbor axis of [N, k, d] -> [N, d]; ties route to the first neighbor.
template <typename T>
Tensor<T> max_over_neighbors(const Tensor<T>& x) {
    detail::require_rank(x.shape(), 3, "max_over_neighbors");
    const std::size_t n = x.dim(0), k = x.dim(1), d = x.dim(2);
    auto v = x.values();
    std::vector<T> out(n * d);
    std::vector<std::uint32_t> arg(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (v[(i * k + j) * d + c] > v[(i * k + best) * d + c]) best = j;
            out[i * d + c] = v[(i * k + best) * d + c];
            arg[i * d + c] = static_cast<std::uint32_t>(best);
        }
    }
    return detail::record<T>({n, d}, std::move(out), {x}, [n, k, d, arg](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) g[(i * k + arg[i * d + c]) * d + c] += self.grad[i * d + c];
    });
}

/// Per-channel normalization of [M, d] rows followed by gamma/beta.
///
/// Train mode normalizes with the rows' own mean and population variance and
/// folds them into the running statistics; eval mode uses the running statistics.
template <typename T>
Tensor<T> channel_norm(const Tensor<T>& x, NormState<T>& state, Mode mode) {
    detail::require_rank(x.shape(), 2, "channel_norm");
    const std::size_t m = x.dim(0), d = x.dim(1);
    if (state.gamma.size() != d) {
        throw DimensionError("channel_norm: state has " + std::to_string(state.gamma.size()) +
                             " channels, input " + shape_str(x.shape()));
    }
    auto v = x.values();
    auto gamma = state.gamma.values();
    auto beta = state.beta.values();
    std::vector<T> mean(d, T{}), inv_std(d);
    const bool batch_stats = mode == Mode::train || state.instance_stats;
    if (batch_stats) {
        std::vector<T> var(d, T{});
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < d; ++c) mean[c] += v[r * d + c];
        for (auto& mu : mean) mu /= static_cast<T>(m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < d; ++c) var[c] += (v[r * d + c] - mean[c]) * (v[r * d + c] - mean[c]);
        const T mom = static_cast<T>(state.momentum);
        for (std::size_t c = 0; c < d; ++c) {
            var[c] /= static_cast<T>(m);
            inv_std[c] = T{1} / std::sqrt(var[c] + static_cast<T>(state.eps));
            if (mode != Mode::train) continue;
            state.running_mean[c] = (T{1} - mom) * state.running_mean[c] + mom * mean[c];
            state.running_var[c] = (T{1} - mom) * state.running_var[c] + mom * var[c];
        }
    } else {
        for (std::size_t c = 0; c < d; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = T{1} / std::sqrt(state.running_var[c] + static_cast<T>(state.eps));
        }
    }
    std::vector<T> xhat(m * d), out(m * d);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            xhat[r * d + c] = (v[r * d + c] - mean[c]) * inv_std[c];
            out[r * d + c] = gamma[c] * xhat[r * d + c] + beta[c];
        }
    return detail::record<T>(
        {m, d}, std::move(out), {x, state.gamma, state.beta},
        [m, d, batch_stats, inv_std, xhat = std::move(xhat)](detail::Node<T>& self) {
            const auto& gamma = self.parents[1]->value;
            const auto& gy = self.grad;
            if (auto* gg = detail::parent_grad(self, 1))
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < d; ++c) (*gg)[c] += gy[r * d + c] * xhat[r * d + c];
            if (auto* gb = detail::parent_grad(self, 2))
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < d; ++c) (*gb)[c] += gy[r * d + c];
            if (auto* gx = detail::parent_grad(self, 0)) {
                if (!batch_stats) {
                    for (std::size_t r = 0; r < m; ++r)
                        for (std::size_t c = 0; c < d; ++c)
                            (*gx)[r * d + c] += gy[r * d + c] * gamma[c] * inv_std[c];
                    return;
                }
                std::vector<T> sum_g(d, T{}), sum_gx(d, T{});
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < d; ++c) {
                        const T dxh = gy[r * d + c] * gamma[c];
                        sum_g[c] += dxh;
                        sum_gx[c] += dxh * xhat[r * d + c];
                    }
                const T inv_m = T{1} / static_cast<T>(m);
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < d; ++c) {
                        const T dxh = gy[r * d + c] * gamma[c];
                        (*gx)[r * d + c] +=
                            inv_std[c] * (dxh - inv_m * sum_g[c] - xhat[r * d + c] * inv_m * sum_gx[c]);
                    }
            }
        });
}

/// D[i, j] = ||a_i - b_j||_2 for a [N, d], b [M, d]. Zero distances get a zero subgradient.
template <typename T>
Tensor<T> pairwise_distance(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank(a.shape(), 2, "pairwise_distance");
    detail::require_rank(b.shape(), 2, "pairwise_distance");
    if (a.dim(1) != b.dim(1)) {
        throw DimensionError("pairwise_distance: feature widths differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    const std::size_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
    const T* A = a.values().data();
    const T* B = b.values().data();
    std::vector<T> out(n * m);
    parallel_for(n, 8, [&](std::size_t i) {
        for (std::size_t j = 0; j < m; ++j) {
            T s{};
            for (std::size_t c = 0; c < d; ++c) {
                const T diff = A[i * d + c] - B[j * d + c];
                s += diff * diff;
            }
            out[i * m + j] = std::sqrt(s);
        }
    });
    return detail::record<T>({n, m}, std::move(out), {a, b}, [n, m, d](detail::Node<T>& self) {
        const T* A = self.parents[0]->value.data();
        const T* B = self.parents[1]->value.data();
        auto* ga = detail::parent_grad(self, 0);
        auto* gb = detail::parent_grad(self, 1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const T dist = self.value[i * m + j];
                const T gij = self.grad[i * m + j];
                if (!(dist > T{}) || gij == T{}) continue;
                const T w = gij / dist;
                for (std::size_t c = 0; c < d; ++c) {
                    const T diff = w * (A[i * d + c] - B[j * d + c]);
                    if (ga) (*ga)[i * d + c] += diff;
                    if (gb) (*gb)[j * d + c] -= diff;
                }
            }
    });
}

/// 1 / (x + eps) elementwise.
template <typename T>
Tensor<T> reciprocal(const Tensor<T>& x, T eps) {
    std::vector<T> out(x.size());
    auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T{1} / (v[i] + eps);
    return detail::record<T>(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] * self.value[i];
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T s{};
    for (T v : x.values()) s += v;
    return detail::record<T>({}, std::vector<T>{s}, {x}, [](detail::Node<T>& self) {
        auto& g = *detail::parent_grad(self, 0);
        for (auto& gi : g) gi += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T{1} / static_cast<T>(x.size()));
}

}  // namespace dpci
