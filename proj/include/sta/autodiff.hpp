#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sta/tensor.hpp"

// Reverse-mode automatic differentiation over a dynamic tape.
//
// A Graph records every operation as it is evaluated; nodes are appended in
// evaluation order, so the tape is topologically sorted by construction and
// backward() just replays it in reverse. Graphs share no state with each
// other: one graph per thread is the concurrency model.

namespace sta::ad {

class Graph;

/// Handle to a node of a Graph.
class Var {
public:
    Var() = default;

    Graph& graph() const { return *graph_; }
    std::uint32_t id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }
    /// Scalar value; the node must hold exactly one element.
    double item() const;

    bool requires_grad() const;
    /// Accumulated gradient; zero-filled if nothing flowed here.
    Tensor grad() const;

private:
    friend class Graph;
    Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    std::uint32_t id_ = 0;
};

class Graph {
public:
    /// Local gradient rule: receives d(root)/d(output) and accumulates into operands.
    using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Leaf owning its value.
    Var input(Tensor value, bool requires_grad = false);
    /// Leaf viewing an external tensor that must outlive the graph.
    Var param(const Tensor& value, bool requires_grad = true);

    /// Appends an operation node. requires_grad is inherited from operands.
    Var record(Tensor value, std::span<const Var> operands, BackwardFn backward);

    const Tensor& value(std::uint32_t id) const;
    bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
    bool has_grad(std::uint32_t id) const { return nodes_[id].grad.size() != 0; }
    const Tensor& grad_ref(std::uint32_t id) const { return nodes_[id].grad; }

    /// Gradient buffer of a node, allocated zeroed on first use.
    Tensor& grad_buffer(std::uint32_t id);

    /// Propagates d(root)/d(node) to every node requiring gradients.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
};

// ---- operations ----------------------------------------------------------

/// a [m x k] times b [k x n] (or b [k], giving [m]).
Var matmul(Var a, Var b);
/// W1 x1 + b, row sums taken in ascending column order.
Var affine(Var w, Var x, Var b);
/// (W1 x1 + W2 x2) + b; the fused LSTM gate / attention pre-activation.
Var affine(Var w1, Var x1, Var w2, Var x2, Var b);

/// Binary ops require equal shapes or one scalar operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Elementwise product with a constant (non-differentiable) tensor.
Var mul_const(Var a, const Tensor& c);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var tanh(Var a);
Var sigmoid(Var a);
/// relu'(0) = 0.
Var relu(Var a);
/// |x|, with subgradient 0 at 0.
Var abs(Var a);
Var square(Var a);
/// log(max(x, floor)); the gradient is 0 where the clamp is active.
Var log_clamped(Var a, double floor);

Var softmax(Var v);
Var sum(Var a);
Var dot(Var a, Var b);
/// Element i of a flat tensor, as a scalar.
Var pick(Var a, std::size_t i);
/// [a0,a0,a0,a1,a1,a1,...] for repeats = 3.
Var repeat_each(Var a, std::size_t repeats);
/// Sum of equally shaped terms, accumulated left to right starting from zero.
Var add_n(std::span<const Var> terms);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace sta::ad
