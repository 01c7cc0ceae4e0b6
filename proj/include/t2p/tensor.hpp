#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major arrays.
//
// A DiffArray is a cheap shared handle onto a graph node. Every operator builds
// a new node that remembers its parents and how to push gradients back into
// them. Nodes that depend on no gradient-requiring input drop their parents, so
// evaluating on constants builds no graph at all.
//
// One graph belongs to one thread; distinct graphs share nothing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "t2p/errors.hpp"

namespace t2p {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty unless requires_grad
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;
    bool is_parameter = false;
};

}  // namespace detail

class DiffArray {
public:
    DiffArray() = default;

    static DiffArray constant(std::vector<double> values, Shape shape) {
        return make_leaf(std::move(values), std::move(shape), false, false);
    }
    static DiffArray constant(std::vector<double> values) {
        Shape shape{values.size()};
        return constant(std::move(values), std::move(shape));
    }
    static DiffArray scalar(double v) { return constant({v}, Shape{1}); }

    /// Trainable leaf: gradient allocated up front and accumulated by backward().
    static DiffArray parameter(std::vector<double> values, Shape shape) {
        return make_leaf(std::move(values), std::move(shape), true, true);
    }
    /// Leaf that receives a gradient but is not a model parameter (e.g. an input under test).
    static DiffArray variable(std::vector<double> values, Shape shape) {
        return make_leaf(std::move(values), std::move(shape), true, false);
    }
    static DiffArray variable(std::vector<double> values) {
        Shape shape{values.size()};
        return variable(std::move(values), std::move(shape));
    }

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    std::span<double> mutable_values() { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    std::vector<double> to_vector() const { return node_->value; }

    double item() const {
        if (size() != 1) throw ContractError("item() on array of shape " + shape_string(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool is_parameter() const { return node_->is_parameter; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }

    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    /// Graph-node identity.
    const void* id() const noexcept { return node_.get(); }

    // Operator plumbing; not part of the user-facing surface.
    const std::shared_ptr<detail::Node>& node() const { return node_; }

    static DiffArray make_result(Shape shape, std::vector<double> values,
                                 std::vector<DiffArray> parents,
                                 std::function<void(detail::Node&)> backward_fn) {
        auto node = std::make_shared<detail::Node>();
        node->shape = std::move(shape);
        node->value = std::move(values);
        bool needs = false;
        for (const auto& p : parents) needs = needs || p.requires_grad();
        if (needs) {
            node->requires_grad = true;
            node->grad.assign(node->value.size(), 0.0);
            node->backward_fn = std::move(backward_fn);
            node->parents.reserve(parents.size());
            for (auto& p : parents) node->parents.push_back(p.node_);
        }
        return DiffArray(std::move(node));
    }

private:
    explicit DiffArray(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    static DiffArray make_leaf(std::vector<double> values, Shape shape, bool grad, bool param) {
        if (shape_size(shape) != values.size())
            throw DimensionError("value count " + std::to_string(values.size()) +
                                 " does not match shape " + shape_string(shape));
        for (auto d : shape)
            if (d == 0) throw DimensionError("zero-length axis in shape " + shape_string(shape));
        auto node = std::make_shared<detail::Node>();
        node->shape = std::move(shape);
        node->value = std::move(values);
        node->requires_grad = grad;
        node->is_parameter = param;
        if (grad) node->grad.assign(node->value.size(), 0.0);
        return DiffArray(std::move(node));
    }

    std::shared_ptr<detail::Node> node_;
};

/// Back-propagates d(loss)/d(node) into every gradient-requiring ancestor.
/// Leaf gradients accumulate across calls; interior gradients are recomputed.
inline void backward(const DiffArray& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward() needs a scalar loss, got shape " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("<empty>")));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order without recursion depth limits.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    detail::Node* root = loss.node().get();
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order)
        if (node->backward_fn) std::fill(node->grad.begin(), node->grad.end(), 0.0);
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

inline void zero_grad(std::span<DiffArray> params) {
    for (auto& p : params) p.zero_grad();
}

namespace detail {

inline Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

inline void require_same_size(const DiffArray& a, const DiffArray& b, const char* op) {
    if (a.size() != b.size())
        throw DimensionError(std::string(op) + ": operand shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " differ");
}

template <typename Fwd, typename Dfdx>
DiffArray unary(const DiffArray& a, Fwd fwd, Dfdx dfdx) {
    std::vector<double> out(a.size());
    auto in = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
    return DiffArray::make_result(a.shape(), std::move(out), {a}, [dfdx](Node& self) {
        Node& p = parent(self, 0);
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
    });
}

// Elementwise binary op; either operand may be a single element that broadcasts.
template <typename Fwd, typename Dfda, typename Dfdb>
DiffArray binary(const DiffArray& a, const DiffArray& b, const char* name, Fwd fwd, Dfda dfda, Dfdb dfdb) {
    const bool a_scalar = a.size() == 1 && b.size() != 1;
    const bool b_scalar = b.size() == 1 && a.size() != 1;
    if (!a_scalar && !b_scalar) require_same_size(a, b, name);
    const Shape& shape = a_scalar ? b.shape() : a.shape();
    const std::size_t n = std::max(a.size(), b.size());
    std::vector<double> out(n);
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
    return DiffArray::make_result(shape, std::move(out), {a, b}, [=](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = pa.value[a_scalar ? 0 : i];
            const double y = pb.value[b_scalar ? 0 : i];
            if (pa.requires_grad) pa.grad[a_scalar ? 0 : i] += self.grad[i] * dfda(x, y, self.value[i]);
            if (pb.requires_grad) pb.grad[b_scalar ? 0 : i] += self.grad[i] * dfdb(x, y, self.value[i]);
        }
    });
}

inline double stable_softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline DiffArray add(const DiffArray& a, const DiffArray& b) {
    return detail::binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return 1.0; });
}

inline DiffArray sub(const DiffArray& a, const DiffArray& b) {
    return detail::binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return -1.0; });
}

inline DiffArray mul(const DiffArray& a, const DiffArray& b) {
    return detail::binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
        [](double x, double, double) { return x; });
}

inline DiffArray div(const DiffArray& a, const DiffArray& b) {
    return detail::binary(
        a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double, double y, double out) { return -out / y; });
}

/// log(exp(a) + exp(b)) without overflow.
inline DiffArray logaddexp(const DiffArray& a, const DiffArray& b) {
    return detail::binary(
        a, b, "logaddexp",
        [](double x, double y) -> double {
            const double m = std::max(x, y);
            if (m == -INFINITY) return m;
            return m + std::log1p(std::exp(std::min(x, y) - m));
        },
        [](double x, double, double out) { return std::exp(x - out); },
        [](double, double y, double out) { return std::exp(y - out); });
}

inline DiffArray add_scalar(const DiffArray& a, double c) {
    return detail::unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline DiffArray mul_scalar(const DiffArray& a, double c) {
    return detail::unary(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

inline DiffArray neg(const DiffArray& a) { return mul_scalar(a, -1.0); }

inline DiffArray log(const DiffArray& a) {
    return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline DiffArray exp(const DiffArray& a) {
    return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline DiffArray square(const DiffArray& a) {
    return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation { relu, softplus };

inline DiffArray relu(const DiffArray& a) {
    return detail::unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// ln(1 + e^x), overflow-safe for large |x|.
inline DiffArray softplus(const DiffArray& a) {
    return detail::unary(a, detail::stable_softplus, [](double x, double) { return detail::stable_sigmoid(x); });
}

inline DiffArray sigmoid(const DiffArray& a) {
    return detail::unary(a, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline DiffArray activation(const DiffArray& a, Activation kind) {
    switch (kind) {
        case Activation::relu: return relu(a);
        case Activation::softplus: return softplus(a);
    }
    throw ContractError("unknown activation");
}

/// max(x, floor); gradient flows only where x is above the floor.
inline DiffArray clamp_min(const DiffArray& a, double floor) {
    return detail::unary(
        a, [floor](double x) { return x > floor ? x : floor; },
        [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

inline DiffArray sum(const DiffArray& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return DiffArray::make_result(Shape{1}, {s}, {a}, [](detail::Node& self) {
        auto& p = detail::parent(self, 0);
        for (auto& g : p.grad) g += self.grad[0];
    });
}

inline DiffArray mean(const DiffArray& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size())); }

/// Mean squared error between two equally sized arrays.
inline DiffArray mse(const DiffArray& a, const DiffArray& b) {
    detail::require_same_size(a, b, "mse");
    const std::size_t n = a.size();
    auto av = a.values();
    auto bv = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = av[i] - bv[i];
        s += d * d;
    }
    return DiffArray::make_result(Shape{1}, {s / static_cast<double>(n)}, {a, b}, [n](detail::Node& self) {
        auto& pa = detail::parent(self, 0);
        auto& pb = detail::parent(self, 1);
        const double scale = 2.0 * self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pa.value[i] - pb.value[i];
            if (pa.requires_grad) pa.grad[i] += scale * d;
            if (pb.requires_grad) pb.grad[i] -= scale * d;
        }
    });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline DiffArray reshape(const DiffArray& a, Shape shape) {
    if (shape_size(shape) != a.size())
        throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
    return DiffArray::make_result(std::move(shape), a.to_vector(), {a}, [](detail::Node& self) {
        auto& p = detail::parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

inline DiffArray flatten(const DiffArray& a) { return reshape(a, Shape{a.size()}); }

/// Contiguous 1-D slice [offset, offset + length) of the flattened array.
inline DiffArray slice(const DiffArray& a, std::size_t offset, std::size_t length) {
    if (length == 0 || offset + length > a.size())
        throw DimensionError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                             ") out of range for " + shape_string(a.shape()));
    auto v = a.values();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(offset),
                            v.begin() + static_cast<std::ptrdiff_t>(offset + length));
    return DiffArray::make_result(Shape{length}, std::move(out), {a}, [offset](detail::Node& self) {
        auto& p = detail::parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[offset + i] += self.grad[i];
    });
}

/// Stacks `reps` copies of a 1-D array into a [reps x n] array.
inline DiffArray tile(const DiffArray& a, std::size_t reps) {
    if (reps == 0) throw DimensionError("tile: zero repetitions");
    const std::size_t n = a.size();
    std::vector<double> out;
    out.reserve(n * reps);
    for (std::size_t r = 0; r < reps; ++r) out.insert(out.end(), a.values().begin(), a.values().end());
    return DiffArray::make_result(Shape{reps, n}, std::move(out), {a}, [n](detail::Node& self) {
        auto& p = detail::parent(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i % n] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// Dense map: weights [rows x cols] times x [cols], plus optional bias [rows].
inline DiffArray linear(const DiffArray& weights, const DiffArray& x, const DiffArray& bias = {}) {
    if (weights.rank() != 2)
        throw DimensionError("linear: weights must be rank 2, got " + shape_string(weights.shape()));
    const std::size_t rows = weights.dim(0);
    const std::size_t cols = weights.dim(1);
    if (x.size() != cols)
        throw DimensionError("linear: weight columns (" + std::to_string(cols) + ") != input length (" +
                             std::to_string(x.size()) + ")");
    if (bias.defined() && bias.size() != rows)
        throw DimensionError("linear: bias length (" + std::to_string(bias.size()) + ") != weight rows (" +
                             std::to_string(rows) + ")");
    auto w = weights.values();
    auto xv = x.values();
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = bias.defined() ? bias[r] : 0.0;
        const double* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += row[c] * xv[c];
        out[r] = s;
    }
    std::vector<DiffArray> parents{weights, x};
    if (bias.defined()) parents.push_back(bias);
    const bool has_bias = bias.defined();
    return DiffArray::make_result(Shape{rows}, std::move(out), std::move(parents),
                                  [rows, cols, has_bias](detail::Node& self) {
                                      auto& pw = detail::parent(self, 0);
                                      auto& px = detail::parent(self, 1);
                                      for (std::size_t r = 0; r < rows; ++r) {
                                          const double g = self.grad[r];
                                          if (g == 0.0) continue;
                                          const double* row = pw.value.data() + r * cols;
                                          if (pw.requires_grad) {
                                              double* grow = pw.grad.data() + r * cols;
                                              for (std::size_t c = 0; c < cols; ++c) grow[c] += g * px.value[c];
                                          }
                                          if (px.requires_grad)
                                              for (std::size_t c = 0; c < cols; ++c) px.grad[c] += g * row[c];
                                      }
                                      if (has_bias) {
                                          auto& pb = detail::parent(self, 2);
                                          if (pb.requires_grad)
                                              for (std::size_t r = 0; r < rows; ++r) pb.grad[r] += self.grad[r];
                                      }
                                  });
}

/// x [rows] times matrix [rows x cols] -> [cols]; a z-weighted sum of matrix rows.
inline DiffArray vecmat(const DiffArray& x, const DiffArray& matrix) {
    if (matrix.rank() != 2)
        throw DimensionError("vecmat: matrix must be rank 2, got " + shape_string(matrix.shape()));
    const std::size_t rows = matrix.dim(0);
    const std::size_t cols = matrix.dim(1);
    if (x.size() != rows)
        throw DimensionError("vecmat: vector length (" + std::to_string(x.size()) + ") != matrix rows (" +
                             std::to_string(rows) + ")");
    auto mv = matrix.values();
    auto xv = x.values();
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = mv.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += xv[r] * row[c];
    }
    return DiffArray::make_result(Shape{cols}, std::move(out), {x, matrix}, [rows, cols](detail::Node& self) {
        auto& px = detail::parent(self, 0);
        auto& pm = detail::parent(self, 1);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = pm.value.data() + r * cols;
            if (px.requires_grad) {
                double s = 0.0;
                for (std::size_t c = 0; c < cols; ++c) s += self.grad[c] * row[c];
                px.grad[r] += s;
            }
            if (pm.requires_grad) {
                double* grow = pm.grad.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) grow[c] += px.value[r] * self.grad[c];
            }
        }
    });
}

/// Max-subtracted softmax over a 1-D array.
inline DiffArray softmax(const DiffArray& a) {
    const std::size_t n = a.size();
    auto v = a.values();
    const double mx = *std::max_element(v.begin(), v.end());
    std::vector<double> out(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(v[i] - mx);
        s += out[i];
    }
    for (auto& o : out) o /= s;
    return DiffArray::make_result(a.shape(), std::move(out), {a}, [n](detail::Node& self) {
        auto& p = detail::parent(self, 0);
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += self.grad[i] * self.value[i];
        for (std::size_t i = 0; i < n; ++i) p.grad[i] += self.value[i] * (self.grad[i] - dot);
    });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

namespace detail {

// Interprets a rank-1 array as a single channel.
inline std::pair<std::size_t, std::size_t> channels_and_length(const DiffArray& a, const char* op) {
    if (a.rank() == 1) return {1, a.dim(0)};
    if (a.rank() == 2) return {a.dim(0), a.dim(1)};
    throw DimensionError(std::string(op) + ": input must be [length] or [channels x length], got " +
                         shape_string(a.shape()));
}

}  // namespace detail

/// Cross-correlation (no kernel flip).
/// input [channels_in x length], kernels [channels_out x channels_in x width], bias [channels_out].
inline DiffArray conv1d(const DiffArray& input, const DiffArray& kernels, std::size_t stride = 1,
                        std::size_t padding = 0, const DiffArray& bias = {}) {
    const auto [cin, len] = detail::channels_and_length(input, "conv1d");
    if (kernels.rank() != 3)
        throw DimensionError("conv1d: kernels must be [out x in x width], got " + shape_string(kernels.shape()));
    const std::size_t cout = kernels.dim(0);
    const std::size_t width = kernels.dim(2);
    if (kernels.dim(1) != cin)
        throw DimensionError("conv1d: kernel input-channel axis (" + std::to_string(kernels.dim(1)) +
                             ") != input channel axis (" + std::to_string(cin) + ")");
    if (stride == 0) throw DimensionError("conv1d: stride must be positive");
    if (width > len + 2 * padding)
        throw DimensionError("conv1d: kernel width axis (" + std::to_string(width) +
                             ") exceeds padded input length axis (" + std::to_string(len + 2 * padding) + ")");
    if (bias.defined() && bias.size() != cout)
        throw DimensionError("conv1d: bias length (" + std::to_string(bias.size()) +
                             ") != output channel axis (" + std::to_string(cout) + ")");
    const std::size_t out_len = (len + 2 * padding - width) / stride + 1;

    // Valid output range [lo, hi) for kernel tap w: 0 <= t * stride + w - padding < len.
    auto tap_range = [=](std::size_t w) -> std::pair<std::size_t, std::size_t> {
        const std::size_t lo = w >= padding ? 0 : (padding - w + stride - 1) / stride;
        if (len + padding < w + 1) return {0, 0};
        const std::size_t hi = std::min(out_len, (len + padding - w - 1) / stride + 1);
        return {std::min(lo, hi), hi};
    };

    // Loop order keeps each output's summation sequence b, (c0,w0), (c0,w1), ...
    auto in = input.values();
    auto k = kernels.values();
    std::vector<double> out(cout * out_len);
    for (std::size_t o = 0; o < cout; ++o) {
        double* orow = out.data() + o * out_len;
        std::fill(orow, orow + out_len, bias.defined() ? bias[o] : 0.0);
        for (std::size_t c = 0; c < cin; ++c) {
            const double* kr = k.data() + (o * cin + c) * width;
            const double* ir = in.data() + c * len;
            for (std::size_t w = 0; w < width; ++w) {
                const double kw = kr[w];
                if (stride == 1 && padding == 0) {
                    const double* src = ir + w;
                    for (std::size_t t = 0; t < out_len; ++t) orow[t] += kw * src[t];
                    continue;
                }
                const auto [lo, hi] = tap_range(w);
                for (std::size_t t = lo; t < hi; ++t) orow[t] += kw * ir[t * stride + w - padding];
            }
        }
    }

    std::vector<DiffArray> parents{input, kernels};
    if (bias.defined()) parents.push_back(bias);
    const bool has_bias = bias.defined();
    return DiffArray::make_result(
        Shape{cout, out_len}, std::move(out), std::move(parents),
        [=](detail::Node& self) {
            auto& pin = detail::parent(self, 0);
            auto& pk = detail::parent(self, 1);
            for (std::size_t o = 0; o < cout; ++o) {
                const double* g = self.grad.data() + o * out_len;
                for (std::size_t c = 0; c < cin; ++c) {
                    const std::size_t krow = (o * cin + c) * width;
                    const double* ir = pin.value.data() + c * len;
                    double* gi = pin.requires_grad ? pin.grad.data() + c * len : nullptr;
                    for (std::size_t w = 0; w < width; ++w) {
                        if (stride == 1 && padding == 0) {
                            const double* src = ir + w;
                            if (pk.requires_grad) {
                                double s = 0.0;
                                for (std::size_t t = 0; t < out_len; ++t) s += g[t] * src[t];
                                pk.grad[krow + w] += s;
                            }
                            if (gi) {
                                const double kw = pk.value[krow + w];
                                double* dst = gi + w;
                                for (std::size_t t = 0; t < out_len; ++t) dst[t] += g[t] * kw;
                            }
                            continue;
                        }
                        const auto [lo, hi] = tap_range(w);
                        if (pk.requires_grad) {
                            double s = 0.0;
                            for (std::size_t t = lo; t < hi; ++t) s += g[t] * ir[t * stride + w - padding];
                            pk.grad[krow + w] += s;
                        }
                        if (gi) {
                            const double kw = pk.value[krow + w];
                            for (std::size_t t = lo; t < hi; ++t) gi[t * stride + w - padding] += g[t] * kw;
                        }
                    }
                }
            }
            if (has_bias) {
                auto& pb = detail::parent(self, 2);
                if (pb.requires_grad)
                    for (std::size_t o = 0; o < cout; ++o)
                        for (std::size_t t = 0; t < out_len; ++t) pb.grad[o] += self.grad[o * out_len + t];
            }
        });
}

/// Per-channel max over sliding windows. Gradient goes to the first maximal element.
inline DiffArray maxpool1d(const DiffArray& input, std::size_t window, std::size_t stride) {
    const auto [channels, len] = detail::channels_and_length(input, "maxpool1d");
    if (window == 0 || stride == 0) throw DimensionError("maxpool1d: window and stride must be positive");
    if (window > len)
        throw DimensionError("maxpool1d: window (" + std::to_string(window) + ") exceeds length axis (" +
                             std::to_string(len) + ")");
    const std::size_t out_len = (len - window) / stride + 1;
    auto in = input.values();
    std::vector<double> out(channels * out_len);
    std::vector<std::size_t> argmax(channels * out_len);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < out_len; ++t) {
            std::size_t best = c * len + t * stride;
            for (std::size_t w = 1; w < window; ++w) {
                const std::size_t idx = c * len + t * stride + w;
                if (in[idx] > in[best]) best = idx;
            }
            out[c * out_len + t] = in[best];
            argmax[c * out_len + t] = best;
        }
    }
    Shape shape = input.rank() == 1 ? Shape{out_len} : Shape{channels, out_len};
    return DiffArray::make_result(std::move(shape), std::move(out), {input},
                                  [argmax = std::move(argmax)](detail::Node& self) {
                                      auto& p = detail::parent(self, 0);
                                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                                          p.grad[argmax[i]] += self.grad[i];
                                  });
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam moments, one pair of accumulators per parameter array.
struct AdamState {
    AdamOptions options;
    std::size_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    AdamState() = default;
    AdamState(std::span<const DiffArray> params, AdamOptions opts) : options(opts) {
        for (const auto& p : params) {
            first_moment.emplace_back(p.size(), 0.0);
            second_moment.emplace_back(p.size(), 0.0);
        }
    }
};

inline void adam_step(std::span<DiffArray> params, AdamState& state) {
    if (params.size() != state.first_moment.size())
        throw ContractError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                            " parameters, got " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad())
            throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
        if (params[i].size() != state.first_moment[i].size())
            throw ContractError("adam_step: parameter " + std::to_string(i) + " changed size");
    }
    const auto& o = state.options;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].mutable_values();
        auto grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad[j];
            m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
            v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
            // Moments of parameters with zero gradient decay into subnormals,
            // which are very slow on x86. Their contribution is nil anyway.
            if (std::abs(m[j]) < std::numeric_limits<double>::min()) m[j] = 0.0;
            if (v[j] < std::numeric_limits<double>::min()) v[j] = 0.0;
            value[j] -= o.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient oracle

struct FiniteDiffOptions {
    double step = 1e-4;
    /// Coordinates checked per parameter array; 0 checks every coordinate.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

/// Compares backward() against central differences of `f` and returns
/// max_i |g_analytic - g_fd| / max(1e-8, |g_fd|). `f` must be deterministic.
inline double finite_diff_check(const std::function<DiffArray()>& f, std::span<DiffArray> params,
                                FiniteDiffOptions opts = {}) {
    for (auto& p : params) {
        if (!p.has_grad()) throw ContractError("finite_diff_check: parameter does not track gradients");
        p.zero_grad();
    }
    backward(f());
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

    std::uint64_t lcg = opts.seed * 6364136223846793005ULL + 1442695040888963407ULL;
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto values = params[pi].mutable_values();
        std::vector<std::size_t> coords(values.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opts.max_coords_per_param && opts.max_coords_per_param < coords.size()) {
            for (std::size_t i = 0; i < opts.max_coords_per_param; ++i) {
                lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
                const std::size_t j = i + static_cast<std::size_t>((lcg >> 33) % (coords.size() - i));
                std::swap(coords[i], coords[j]);
            }
            coords.resize(opts.max_coords_per_param);
        }
        for (std::size_t idx : coords) {
            const double saved = values[idx];
            values[idx] = saved + opts.step;
            const double up = f().item();
            values[idx] = saved - opts.step;
            const double down = f().item();
            values[idx] = saved;
            const double fd = (up - down) / (2.0 * opts.step);
            const double err = std::abs(analytic[pi][idx] - fd) / std::max(1e-8, std::abs(fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace t2p
