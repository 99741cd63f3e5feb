#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dpci/core/errors.hpp"

namespace dpci {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

/// Train mode uses batch statistics in normalization layers and updates running stats.
enum class Mode { train, eval };

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    // Non-zero for nodes produced by a recorded op; gives the replay order.
    std::uint64_t order = 0;
    bool released = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<T>& grad_buffer() {
        if (grad.size() != value.size()) grad.assign(value.size(), T{});
        return grad;
    }
};

inline std::uint64_t next_order() {
    thread_local std::uint64_t counter = 0;
    return ++counter;
}

inline bool& grad_enabled() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// RAII guard that stops op recording on the current thread (inference paths).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_enabled()) { detail::grad_enabled() = false; }
    ~NoGradGuard() { detail::grad_enabled() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

/// Dense row-major array with optional attachment to the gradient tape.
///
/// Tensor is a handle: copies share the same storage and tape node. Values of a
/// recorded (non-leaf) tensor are never mutated after creation.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{}) : node_(std::make_shared<detail::Node<T>>()) {
        node_->value.assign(shape_size(shape), fill);
        node_->shape = std::move(shape);
    }

    Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
        if (shape_size(shape) != values.size()) {
            throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                                 std::to_string(values.size()) + " values");
        }
        node_->shape = std::move(shape);
        node_->value = std::move(values);
    }

    static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

    static Tensor parameter(Shape shape, std::vector<T> values) {
        Tensor t(std::move(shape), std::move(values));
        t.node_->requires_grad = true;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const T> values() const { return node_->value; }

    /// Writable view for leaves only (parameters, optimizer updates, test fixtures).
    std::span<T> mutable_values() {
        if (node_->order != 0) throw TapeError("cannot mutate a tape-recorded tensor");
        return node_->value;
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) {
        if (node_->order != 0) throw TapeError("requires_grad is fixed for recorded tensors");
        node_->requires_grad = on;
    }
    bool is_recorded() const { return node_->order != 0; }

    bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    T item() const {
        if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
        return node_->value[0];
    }

    T operator()(std::size_t i, std::size_t j) const { return node_->value[i * node_->shape.back() + j]; }

    /// Fresh leaf holding a copy of the values.
    Tensor detach() const { return Tensor(node_->shape, node_->value); }

    detail::Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }

private:
    std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

/// Creates the result of an op. Records it on the tape when grad mode is on and
/// any parent needs a gradient; `backward(self)` must accumulate into parents.
template <typename T>
Tensor<T> record(Shape shape, std::vector<T> value, std::initializer_list<Tensor<T>> parents,
                 std::function<void(Node<T>&)> backward) {
    Tensor<T> out(std::move(shape), std::move(value));
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    auto* n = out.node();
    n->requires_grad = true;
    n->order = next_order();
    for (const auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward = std::move(backward);
    return out;
}

template <typename T>
Tensor<T> record(Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& parents,
                 std::function<void(Node<T>&)> backward) {
    Tensor<T> out(std::move(shape), std::move(value));
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    auto* n = out.node();
    n->requires_grad = true;
    n->order = next_order();
    for (const auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward = std::move(backward);
    return out;
}

/// Gradient buffer of parent `i`, or nullptr when that parent does not need one.
template <typename T>
std::vector<T>* parent_grad(Node<T>& self, std::size_t i) {
    auto& p = self.parents[i];
    return p->requires_grad ? &p->grad_buffer() : nullptr;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss.
///
/// Nodes reachable from the loss are replayed in decreasing record order, so each
/// node's gradient is complete before it propagates. The traversed graph is
/// released afterwards; a second call on the same loss throws TapeError.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) throw TapeError("backward needs a scalar loss, got " + shape_str(loss.shape()));
    auto* root = loss.node();
    if (root->released) throw TapeError("stale tape: backward already ran for this loss");
    if (root->order == 0) throw TapeError("loss is not tape-recorded");

    std::vector<detail::Node<T>*> recorded;
    std::unordered_set<detail::Node<T>*> seen;
    std::vector<detail::Node<T>*> stack{root};
    seen.insert(root);
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        if (n->order == 0) continue;
        if (n->released) throw TapeError("stale tape: graph was already consumed by backward");
        recorded.push_back(n);
        for (auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(recorded.begin(), recorded.end(), [](auto* a, auto* b) { return a->order > b->order; });

    root->grad_buffer()[0] += T{1};
    for (auto* n : recorded) {
        if (!n->grad.empty()) n->backward(*n);
    }
    // Parents are moved out first so no node is freed while the loop still visits it.
    std::vector<std::shared_ptr<detail::Node<T>>> hold;
    for (auto* n : recorded) {
        n->backward = nullptr;
        for (auto& p : n->parents) hold.push_back(std::move(p));
        n->parents.clear();
        n->released = true;
        if (n != root) n->grad.clear();
    }
}

}  // namespace dpci
