#pragma once

// Dense n-dimensional tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a node in a computation DAG. Every op in
// this library produces a fresh node whose values are never mutated again;
// the node stores a backprop closure that scatters the node's gradient into
// its parents. backward() runs the closures in reverse topological order.
//
// All storage is double precision, row-major.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace dcrnn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

inline std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ", ";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // same length as data once a backward pass ran
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void()> backprop;  // scatters this->grad into parents' grads

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() : node_(std::make_shared<TensorNode>()) {}

    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
        : node_(std::make_shared<TensorNode>()) {
        for (std::size_t d : shape) {
            if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension in shape " + shape_to_string(shape));
        }
        node_->shape = std::move(shape);
        node_->data.assign(shape_numel(node_->shape), fill);
        node_->requires_grad = requires_grad;
    }

    static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false) {
        Tensor t;
        if (shape_numel(shape) != values.size()) {
            throw std::invalid_argument("Tensor::from_data: shape " + shape_to_string(shape) + " expects " +
                                        std::to_string(shape_numel(shape)) + " values, got " +
                                        std::to_string(values.size()));
        }
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(values);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double item() const {
        if (size() != 1) throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(size()) + " elements");
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }

    bool has_grad() const { return node_->grad.size() == node_->data.size(); }
    std::vector<double>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<double>& grad() const {
        if (!has_grad()) throw std::runtime_error("Tensor::grad: no gradient present (run backward first)");
        return node_->grad;
    }

    bool all_finite() const {
        for (double v : node_->data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    // Throws if any value is NaN or Inf; `what` names the tensor in the message.
    void check_finite(const std::string& what) const {
        for (std::size_t i = 0; i < node_->data.size(); ++i) {
            if (!std::isfinite(node_->data[i])) {
                throw std::runtime_error("non-finite value in " + what + " at flat index " + std::to_string(i));
            }
        }
    }

    std::shared_ptr<TensorNode>& node() { return node_; }
    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline void topo_sort(const std::shared_ptr<TensorNode>& root, std::vector<TensorNode*>& order) {
    // Iterative post-order DFS; parents appear before their consumers.
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Every requires_grad tensor reachable
// from `loss` receives grad = d(loss)/d(tensor); previous grads are cleared.
inline void backward(Tensor& loss) {
    if (loss.size() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_to_string(loss.shape()));
    }
    std::vector<TensorNode*> order;
    detail::topo_sort(loss.node(), order);
    for (TensorNode* node : order) {
        node->grad.assign(node->data.size(), 0.0);
    }
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop();
    }
}

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
    }
}

inline void wire(Tensor& out, std::initializer_list<Tensor> inputs, std::function<void()> backprop) {
    bool needs = false;
    for (const Tensor& in : inputs) needs = needs || in.requires_grad();
    if (!needs) return;
    out.node()->requires_grad = true;
    for (const Tensor& in : inputs) out.node()->parents.push_back(in.node());
    out.node()->backprop = std::move(backprop);
}

}  // namespace detail

// --- Elementwise arithmetic -------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    detail::wire(out, {a, b}, [an = a.node(), bn = b.node(), on = out.node().get()]() {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
        }
    });
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    detail::wire(out, {a, b}, [an = a.node(), bn = b.node(), on = out.node().get()]() {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
        }
    });
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    detail::wire(out, {a, b}, [an = a.node(), bn = b.node(), on = out.node().get()]() {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += bn->data[i] * on->grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += an->data[i] * on->grad[i];
        }
    });
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = c * a.data()[i];
    detail::wire(out, {a}, [an = a.node(), on = out.node().get(), c]() {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += c * on->grad[i];
    });
    return out;
}

// Sum of all elements, as a scalar tensor.
inline Tensor sum(const Tensor& a) {
    Tensor out = Tensor::scalar(std::accumulate(a.data().begin(), a.data().end(), 0.0));
    detail::wire(out, {a}, [an = a.node(), on = out.node().get()]() {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
    });
    return out;
}

// [B, C, T, F] -> [B, T, C*F]: per frame, channel-major concatenation of the
// frequency rows. This is the bridge from the conv stack to the BLSTM.
inline Tensor to_time_major(const Tensor& x) {
    if (x.rank() != 4) {
        throw std::invalid_argument("to_time_major: expected rank-4 [batch, ch, time, freq], got " +
                                    shape_to_string(x.shape()));
    }
    const std::size_t b = x.dim(0), c = x.dim(1), t = x.dim(2), f = x.dim(3);
    Tensor out({b, t, c * f});
    const double* src = x.data().data();
    double* dst = out.data().data();
    for (std::size_t ib = 0; ib < b; ++ib)
        for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t it = 0; it < t; ++it) {
                const double* row = src + ((ib * c + ic) * t + it) * f;
                double* orow = dst + (ib * t + it) * (c * f) + ic * f;
                std::copy(row, row + f, orow);
            }
    detail::wire(out, {x}, [xn = x.node(), on = out.node().get(), b, c, t, f]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t ib = 0; ib < b; ++ib)
            for (std::size_t ic = 0; ic < c; ++ic)
                for (std::size_t it = 0; it < t; ++it) {
                    double* row = xn->grad.data() + ((ib * c + ic) * t + it) * f;
                    const double* orow = on->grad.data() + (ib * t + it) * (c * f) + ic * f;
                    for (std::size_t k = 0; k < f; ++k) row[k] += orow[k];
                }
    });
    return out;
}

}  // namespace dcrnn
