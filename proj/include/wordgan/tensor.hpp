#pragma once

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node. Operations on tracked
// tensors record a backward rule and their inputs; backward() walks the
// recorded nodes in reverse creation order, which is a valid reverse
// topological order because inputs always exist before their outputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wordgan/error.hpp"

namespace wordgan {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint64_t;

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

inline void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape)
        if (d == 0) throw ShapeError("zero-extent dimension in shape " + to_string(shape));
}

namespace detail {

inline std::atomic<NodeId> next_node_id{1};
inline thread_local bool grad_mode = true;

template <std::floating_point T>
struct Node {
    NodeId id = 0;  // 0 when untracked
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad;
    }
};

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode) { detail::grad_mode = false; }
    ~NoGradGuard() { detail::grad_mode = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode; }

template <std::floating_point T>
class Tensor {
public:
    using value_type = T;
    using node_type = detail::Node<T>;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> elements, bool track_gradient = false) {
        validate_shape(shape);
        if (element_count(shape) != elements.size())
            throw ShapeError("element count " + std::to_string(elements.size()) +
                             " does not match shape " + to_string(shape));
        node_ = std::make_shared<node_type>();
        node_->shape = std::move(shape);
        node_->value = std::move(elements);
        if (track_gradient) {
            node_->requires_grad = true;
            node_->id = detail::next_node_id.fetch_add(1, std::memory_order_relaxed);
        }
    }

    static Tensor zeros(Shape shape, bool track_gradient = false) {
        auto n = element_count(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), track_gradient);
    }

    static Tensor full(Shape shape, T value, bool track_gradient = false) {
        auto n = element_count(shape);
        return Tensor(std::move(shape), std::vector<T>(n, value), track_gradient);
    }

    static Tensor scalar(T value, bool track_gradient = false) {
        return Tensor(Shape{1}, std::vector<T>{value}, track_gradient);
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t dim(std::size_t axis) const { return node().shape.at(axis); }
    std::size_t size() const { return node().value.size(); }

    std::span<const T> data() const { return node().value; }
    // Mutable access for parameter updates and in-place initialization.
    std::span<T> mutable_data() { return node().value; }
    T item() const {
        if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
        return node().value[0];
    }
    T operator[](std::size_t i) const { return node().value.at(i); }

    bool requires_grad() const { return node().requires_grad; }
    std::optional<NodeId> node_id() const {
        if (!node().requires_grad) return std::nullopt;
        return node().id;
    }

    // Toggles tracking of a leaf, e.g. to freeze a parameter set for one pass.
    void set_requires_grad(bool track) {
        auto& n = node();
        if (n.backward) throw Error("set_requires_grad on a non-leaf tensor");
        n.requires_grad = track;
        if (track && n.id == 0) n.id = detail::next_node_id.fetch_add(1, std::memory_order_relaxed);
    }

    bool has_grad() const { return !node().grad.empty(); }
    std::span<const T> grad() const { return node().grad; }
    Tensor grad_tensor() const {
        if (!has_grad()) return zeros(shape());
        return Tensor(shape(), node().grad);
    }
    void zero_grad() { node().grad.clear(); }

    // Same values, no graph history, untracked.
    Tensor detach() const { return Tensor(shape(), node().value); }
    Tensor clone(bool track_gradient = false) const { return Tensor(shape(), node().value, track_gradient); }

    node_type& node() const {
        if (!node_) throw Error("use of undefined tensor");
        return *node_;
    }
    const std::shared_ptr<node_type>& node_ptr() const { return node_; }

    static Tensor from_node(std::shared_ptr<node_type> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

private:
    std::shared_ptr<node_type> node_;
};

namespace detail {

template <std::floating_point T>
void check_finite(const std::vector<T>& v, const char* op) {
    if (!Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(v.data(), static_cast<Eigen::Index>(v.size())).allFinite())
        throw NumericError(std::string("non-finite value produced by ") + op);
}

// Builds the result node; records inputs and the backward rule when any
// input is tracked and grad mode is on.
template <std::floating_point T, class Backward>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::initializer_list<const Tensor<T>*> inputs,
                      const char* op, Backward&& backward) {
    check_finite(value, op);
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool track = false;
    if (grad_mode)
        for (auto* in : inputs) track = track || in->requires_grad();
    if (track) {
        node->requires_grad = true;
        node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
        for (auto* in : inputs) node->parents.push_back(in->node_ptr());
        node->backward = std::forward<Backward>(backward);
    }
    return Tensor<T>::from_node(std::move(node));
}

template <std::floating_point T>
Tensor<T> make_result(Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs, const char* op,
                      std::function<void(Node<T>&)> backward) {
    check_finite(value, op);
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool track = false;
    if (grad_mode)
        for (const auto& in : inputs) track = track || in.requires_grad();
    if (track) {
        node->requires_grad = true;
        node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
        for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
        node->backward = std::move(backward);
    }
    return Tensor<T>::from_node(std::move(node));
}

template <std::floating_point T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
    return n->requires_grad;
}

}  // namespace detail

// Gradients of one backward() call, keyed by the node-id of each tracked leaf.
template <std::floating_point T>
class GradientMap {
public:
    void insert(const std::shared_ptr<detail::Node<T>>& leaf) { leaves_[leaf->id] = leaf; }

    bool contains(const Tensor<T>& t) const {
        auto id = t.node_id();
        return id && leaves_.count(*id);
    }
    bool contains(NodeId id) const { return leaves_.count(id) != 0; }

    std::span<const T> of(const Tensor<T>& t) const {
        auto id = t.node_id();
        if (!id) throw Error("gradient requested for an untracked tensor");
        return of(*id);
    }
    std::span<const T> of(NodeId id) const {
        auto it = leaves_.find(id);
        if (it == leaves_.end()) throw Error("no gradient recorded for node " + std::to_string(id));
        return it->second->grad;
    }
    Tensor<T> tensor(const Tensor<T>& t) const {
        auto g = of(t);
        return Tensor<T>(t.shape(), std::vector<T>(g.begin(), g.end()));
    }
    std::size_t size() const { return leaves_.size(); }

private:
    std::unordered_map<NodeId, std::shared_ptr<detail::Node<T>>> leaves_;
};

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
// calls until zero_grad(); intermediate gradients are released afterwards.
template <std::floating_point T>
GradientMap<T> backward(const Tensor<T>& loss) {
    if (loss.size() != 1) throw ShapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
    if (!loss.requires_grad()) throw Error("backward on a loss that is not attached to any tracked tensor");

    using NodeT = detail::Node<T>;
    std::vector<NodeT*> order;
    std::vector<std::shared_ptr<NodeT>> leaves;
    std::unordered_set<NodeT*> seen;
    std::vector<NodeT*> stack{&loss.node()};
    seen.insert(&loss.node());
    while (!stack.empty()) {
        NodeT* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents) {
            if (!p->requires_grad || seen.count(p.get())) continue;
            seen.insert(p.get());
            stack.push_back(p.get());
            if (!p->backward) leaves.push_back(p);
        }
    }
    std::sort(order.begin(), order.end(), [](const NodeT* a, const NodeT* b) { return a->id > b->id; });

    loss.node().ensure_grad()[0] += T(1);
    for (NodeT* n : order) {
        if (!n->backward || n->grad.empty()) continue;
        n->backward(*n);
        n->grad.clear();
        n->grad.shrink_to_fit();
    }

    GradientMap<T> result;
    if (!loss.node().backward) result.insert(loss.node_ptr());
    for (auto& leaf : leaves) {
        leaf->ensure_grad();
        result.insert(leaf);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Elementwise unary operations

enum class UnaryKind { sigmoid, tanh, leaky_relu, log, negate };

template <std::floating_point T>
Tensor<T> unary(UnaryKind kind, const Tensor<T>& x, T alpha = T(0)) {
    const auto& in = x.data();
    std::vector<T> out(in.size());
    const char* name = "unary";
    switch (kind) {
        case UnaryKind::sigmoid:
            name = "sigmoid";
            for (std::size_t i = 0; i < in.size(); ++i) {
                T v = in[i];
                out[i] = v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
            }
            break;
        case UnaryKind::tanh:
            name = "tanh";
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
            break;
        case UnaryKind::leaky_relu:
            name = "leaky_relu";
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? in[i] : alpha * in[i];
            break;
        case UnaryKind::log:
            name = "log";
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (!(in[i] > 0)) throw NumericError("log of non-positive element");
                out[i] = std::log(in[i]);
            }
            break;
        case UnaryKind::negate:
            name = "negate";
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = -in[i];
            break;
    }
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, name, [kind, alpha](detail::Node<T>& self) {
        auto& parent = *self.parents[0];
        auto& g = parent.ensure_grad();
        const auto& y = self.value;
        const auto& xv = parent.value;
        const auto& gy = self.grad;
        switch (kind) {
            case UnaryKind::sigmoid:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * y[i] * (T(1) - y[i]);
                break;
            case UnaryKind::tanh:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * (T(1) - y[i] * y[i]);
                break;
            case UnaryKind::leaky_relu:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += xv[i] > 0 ? gy[i] : alpha * gy[i];
                break;
            case UnaryKind::log:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] / xv[i];
                break;
            case UnaryKind::negate:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gy[i];
                break;
        }
    });
}

template <std::floating_point T>
Tensor<T> sigmoid(const Tensor<T>& x) { return unary(UnaryKind::sigmoid, x); }
template <std::floating_point T>
Tensor<T> tanh(const Tensor<T>& x) { return unary(UnaryKind::tanh, x); }
template <std::floating_point T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha) { return unary(UnaryKind::leaky_relu, x, alpha); }
template <std::floating_point T>
Tensor<T> relu(const Tensor<T>& x) { return unary(UnaryKind::leaky_relu, x, T(0)); }
template <std::floating_point T>
Tensor<T> log(const Tensor<T>& x) { return unary(UnaryKind::log, x); }
template <std::floating_point T>
Tensor<T> negate(const Tensor<T>& x) { return unary(UnaryKind::negate, x); }

// scale * x + shift
template <std::floating_point T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
    const auto& in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = scale * in[i] + shift;
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, "affine", [scale](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * self.grad[i];
    });
}

// Gradient passes where lo <= x <= hi and is zero outside.
template <std::floating_point T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    const auto& in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp(in[i], lo, hi);
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, "clamp", [lo, hi](detail::Node<T>& self) {
        auto& parent = *self.parents[0];
        auto& g = parent.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (parent.value[i] >= lo && parent.value[i] <= hi) g[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Elementwise binary operations.
//
// Broadcast rule: b either has a's shape, or b's shape equals a trailing
// suffix of a's shape (e.g. [N,K] + [K]); b is then repeated over the
// leading axes and its gradient is summed over them.

enum class BinaryKind { add, subtract, multiply };

namespace detail {

inline std::size_t broadcast_period(const Shape& a, const Shape& b) {
    if (a == b) return element_count(a);
    if (b.size() < a.size() && std::equal(b.rbegin(), b.rend(), a.rbegin())) return element_count(b);
    throw ShapeError("shapes " + to_string(a) + " and " + to_string(b) + " are not broadcastable");
}

}  // namespace detail

template <std::floating_point T>
Tensor<T> binary(BinaryKind kind, const Tensor<T>& a, const Tensor<T>& b) {
    const std::size_t period = detail::broadcast_period(a.shape(), b.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<T> out(av.size());
    for (std::size_t base = 0; base < av.size(); base += period) {
        switch (kind) {
            case BinaryKind::add:
                for (std::size_t j = 0; j < period; ++j) out[base + j] = av[base + j] + bv[j];
                break;
            case BinaryKind::subtract:
                for (std::size_t j = 0; j < period; ++j) out[base + j] = av[base + j] - bv[j];
                break;
            case BinaryKind::multiply:
                for (std::size_t j = 0; j < period; ++j) out[base + j] = av[base + j] * bv[j];
                break;
        }
    }
    return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, "binary",
                                  [kind, period](detail::Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& gy = self.grad;
        if (pa.requires_grad) {
            auto& ga = pa.ensure_grad();
            if (kind == BinaryKind::multiply) {
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * pb.value[i % period];
            } else {
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
            }
        }
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            for (std::size_t base = 0; base < gy.size(); base += period) {
                switch (kind) {
                    case BinaryKind::add:
                        for (std::size_t j = 0; j < period; ++j) gb[j] += gy[base + j];
                        break;
                    case BinaryKind::subtract:
                        for (std::size_t j = 0; j < period; ++j) gb[j] -= gy[base + j];
                        break;
                    case BinaryKind::multiply:
                        for (std::size_t j = 0; j < period; ++j) gb[j] += gy[base + j] * pa.value[base + j];
                        break;
                }
            }
        }
    });
}

template <std::floating_point T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return binary(BinaryKind::add, a, b); }
template <std::floating_point T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return binary(BinaryKind::subtract, a, b); }
template <std::floating_point T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return binary(BinaryKind::multiply, a, b); }

// ---------------------------------------------------------------------------
// Reductions

template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& x) {
    T s = 0;
    for (T v : x.data()) s += v;
    return detail::make_result<T>(Shape{1}, std::vector<T>{s}, {&x}, "sum", [](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& x) {
    return affine(sum(x), T(1) / static_cast<T>(x.size()), T(0));
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <std::floating_point T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    validate_shape(shape);
    if (element_count(shape) != x.size())
        throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
    std::vector<T> out(x.data().begin(), x.data().end());
    return detail::make_result<T>(std::move(shape), std::move(out), {&x}, "reshape", [](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <std::floating_point T>
Tensor<T> transpose(const Tensor<T>& x) {
    if (x.rank() != 2) throw ShapeError("transpose expects a matrix, got " + to_string(x.shape()));
    const std::size_t r = x.dim(0), c = x.dim(1);
    const auto& in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
    return detail::make_result<T>(Shape{c, r}, std::move(out), {&x}, "transpose", [r, c](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
    });
}

namespace detail {

// Splits a shape around an axis into (outer, axis extent, inner) element counts.
inline void axis_split(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace detail

template <std::floating_point T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeError("concat axis out of range");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size()) throw ShapeError("concat rank mismatch");
        for (std::size_t d = 0; d < s.size(); ++d)
            if (d != axis && s[d] != first[d])
                throw ShapeError("concat extent mismatch: " + to_string(first) + " vs " + to_string(s));
        out_shape[axis] += s[axis];
    }
    std::size_t outer, inner;
    detail::axis_split(first, axis, outer, inner);
    const std::size_t out_row = out_shape[axis] * inner;
    std::vector<T> out(element_count(out_shape));
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t row = p.dim(axis) * inner;
        offsets.push_back(offset);
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(p.data().begin() + o * row, row, out.begin() + o * out_row + offset);
        offset += row;
    }
    return detail::make_result<T>(out_shape, std::move(out), parts, "concat",
                                  [offsets, outer, out_row](detail::Node<T>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto& p = *self.parents[k];
            if (!p.requires_grad) continue;
            auto& g = p.ensure_grad();
            const std::size_t row = g.size() / outer;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < row; ++j) g[o * row + j] += self.grad[o * out_row + offsets[k] + j];
        }
    });
}

// Elements [begin, end) along axis.
template <std::floating_point T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
    if (axis >= x.rank() || begin >= end || end > x.dim(axis))
        throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range on axis " +
                         std::to_string(axis) + " of " + to_string(x.shape()));
    Shape out_shape = x.shape();
    out_shape[axis] = end - begin;
    std::size_t outer, inner;
    detail::axis_split(x.shape(), axis, outer, inner);
    const std::size_t in_row = x.dim(axis) * inner;
    const std::size_t out_row = (end - begin) * inner;
    const std::size_t start = begin * inner;
    std::vector<T> out(element_count(out_shape));
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(x.data().begin() + o * in_row + start, out_row, out.begin() + o * out_row);
    return detail::make_result<T>(out_shape, std::move(out), {&x}, "slice",
                                  [outer, in_row, out_row, start](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < out_row; ++j) g[o * in_row + start + j] += self.grad[o * out_row + j];
    });
}

// Gathers slices along axis 0; indices may repeat (gradients add up).
template <std::floating_point T>
Tensor<T> select_rows(const Tensor<T>& x, std::vector<std::size_t> indices) {
    if (indices.empty()) throw ShapeError("select_rows with no indices");
    const std::size_t rows = x.dim(0);
    const std::size_t row = x.size() / rows;
    for (auto i : indices)
        if (i >= rows) throw ShapeError("select_rows index " + std::to_string(i) + " out of range");
    Shape out_shape = x.shape();
    out_shape[0] = indices.size();
    std::vector<T> out(indices.size() * row);
    for (std::size_t k = 0; k < indices.size(); ++k)
        std::copy_n(x.data().begin() + indices[k] * row, row, out.begin() + k * row);
    return detail::make_result<T>(out_shape, std::move(out), {&x}, "select_rows",
                                  [indices = std::move(indices), row](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t k = 0; k < indices.size(); ++k)
            for (std::size_t j = 0; j < row; ++j) g[indices[k] * row + j] += self.grad[k * row + j];
    });
}

// [N,C] -> [N,C,H,W], each vector entry replicated over the spatial grid.
template <std::floating_point T>
Tensor<T> tile_spatial(const Tensor<T>& x, std::size_t height, std::size_t width) {
    if (x.rank() != 2) throw ShapeError("tile_spatial expects [N,C], got " + to_string(x.shape()));
    const std::size_t plane = height * width;
    std::vector<T> out(x.size() * plane);
    for (std::size_t i = 0; i < x.size(); ++i) std::fill_n(out.begin() + i * plane, plane, x.data()[i]);
    return detail::make_result<T>(Shape{x.dim(0), x.dim(1), height, width}, std::move(out), {&x}, "tile_spatial",
                                  [plane](detail::Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            T s = 0;
            for (std::size_t j = 0; j < plane; ++j) s += self.grad[i * plane + j];
            g[i] += s;
        }
    });
}

// ---------------------------------------------------------------------------
// Matrix product

namespace detail {

template <std::floating_point T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <std::floating_point T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <std::floating_point T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;

// c[m×n] += a[m×k] · b[k×n]
template <std::floating_point T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    const auto ri = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
    MatrixMap<T>(c, ri(m), ri(n)).noalias() += ConstMatrixMap<T>(a, ri(m), ri(k)) * ConstMatrixMap<T>(b, ri(k), ri(n));
}

// c[m×n] += aᵀ · b with a stored [k×m], b stored [k×n]
template <std::floating_point T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    const auto ri = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
    MatrixMap<T>(c, ri(m), ri(n)).noalias() +=
        ConstMatrixMap<T>(a, ri(k), ri(m)).transpose() * ConstMatrixMap<T>(b, ri(k), ri(n));
}

// c[m×n] += a · bᵀ with a stored [m×k], b stored [n×k]
template <std::floating_point T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    const auto ri = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
    MatrixMap<T>(c, ri(m), ri(n)).noalias() +=
        ConstMatrixMap<T>(a, ri(m), ri(k)) * ConstMatrixMap<T>(b, ri(n), ri(k)).transpose();
}

}  // namespace detail

template <std::floating_point T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul dimension mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(m * n, T(0));
    detail::gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
    return detail::make_result<T>(Shape{m, n}, std::move(out), {&a, &b}, "matmul", [m, n, k](detail::Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad)  // dA = dC · Bᵀ
            detail::gemm_nt(m, k, n, self.grad.data(), pb.value.data(), pa.ensure_grad().data());
        if (pb.requires_grad)  // dB = Aᵀ · dC
            detail::gemm_tn(k, n, m, pa.value.data(), self.grad.data(), pb.ensure_grad().data());
    });
}

// x[N,in] · Wᵀ with W stored [out,in].
template <std::floating_point T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight) {
    if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1))
        throw ShapeError("linear dimension mismatch: " + to_string(x.shape()) + " with weight " +
                         to_string(weight.shape()));
    const std::size_t rows = x.dim(0), in = x.dim(1), outs = weight.dim(0);
    std::vector<T> out(rows * outs, T(0));
    detail::gemm_nt(rows, outs, in, x.data().data(), weight.data().data(), out.data());
    return detail::make_result<T>(Shape{rows, outs}, std::move(out), {&x, &weight}, "linear",
                                  [rows, in, outs](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        if (px.requires_grad)  // dX = dY · W
            detail::gemm_nn(rows, in, outs, self.grad.data(), pw.value.data(), px.ensure_grad().data());
        if (pw.requires_grad)  // dW = dYᵀ · X
            detail::gemm_tn(outs, in, rows, self.grad.data(), px.value.data(), pw.ensure_grad().data());
    });
}

}  // namespace wordgan
