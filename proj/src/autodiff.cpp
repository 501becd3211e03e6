#include "sta/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "sta/errors.hpp"
#include "sta/kernels.hpp"

namespace sta::ad {

// ---- Var / Graph ---------------------------------------------------------

const Tensor& Var::value() const { return graph_->value(id_); }

double Var::item() const {
    const Tensor& v = value();
    if (v.size() != 1) throw ContractError("item() on non-scalar of shape " + shape_string(v.shape()));
    return v[0];
}

bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Tensor Var::grad() const {
    if (graph_->has_grad(id_)) return graph_->grad_ref(id_);
    return Tensor(value().shape(), 0.0);
}

Var Graph::input(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::param(const Tensor& value, bool requires_grad) {
    Node n;
    n.external = &value;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::record(Tensor value, std::span<const Var> operands, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : operands) {
        if (&v.graph() != this) throw ContractError("operands belong to a different graph");
        n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Graph::value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
}

Tensor& Graph::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Tensor(value(id).shape(), 0.0);
    return n.grad;
}

void Graph::backward(Var root) {
    if (&root.graph() != this) throw ContractError("backward root belongs to a different graph");
    if (root.size() != 1) {
        throw ContractError("backward root must be scalar, got shape " + shape_string(root.shape()));
    }
    if (!nodes_[root.id()].requires_grad) return;
    grad_buffer(root.id())[0] += 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
        // The rule may grow grad buffers of earlier nodes but never touches this one.
        const Tensor g = n.grad;
        n.backward(*this, g);
    }
}

// ---- helpers -------------------------------------------------------------

namespace {

Graph& same_graph(Var a, Var b) {
    if (&a.graph() != &b.graph()) throw ContractError("operands belong to different graphs");
    return a.graph();
}

bool needs(Graph& g, Var v) { return g.requires_grad(v.id()); }

std::string two_shapes(const char* op, Var a, Var b) {
    return std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape());
}

// Returns the broadcast output shape, or throws.
const Shape& broadcast_shape(const char* op, Var a, Var b) {
    if (a.shape() == b.shape()) return a.shape();
    if (a.size() == 1) return b.shape();
    if (b.size() == 1) return a.shape();
    throw DimensionError(two_shapes(op, a, b));
}

// Accumulates grad contributions of a broadcast operand.
void accumulate_broadcast(Graph& g, Var operand, const Tensor& contrib) {
    Tensor& buf = g.grad_buffer(operand.id());
    if (buf.size() == contrib.size()) {
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += contrib[i];
    } else {
        double s = 0.0;
        for (std::size_t i = 0; i < contrib.size(); ++i) s += contrib[i];
        buf[0] += s;
    }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
    Graph& g = a.graph();
    const Tensor& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
    const Var ops[] = {a};
    const Var res = g.record(std::move(out), ops, [a, deriv](Graph& gr, const Tensor& gout) {
        const Tensor& xv = gr.value(a.id());
        Tensor& buf = gr.grad_buffer(a.id());
        for (std::size_t i = 0; i < gout.size(); ++i) buf[i] += gout[i] * deriv(xv[i]);
    });
    return res;
}

// Unary op whose derivative is cheaper in terms of the output value.
template <typename Fwd, typename DerivOut>
Var unary_out(Var a, Fwd fwd, DerivOut deriv_out) {
    Graph& g = a.graph();
    const Tensor& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
    const Var ops[] = {a};
    const auto self = static_cast<std::uint32_t>(g.size());
    return g.record(std::move(out), ops, [a, self, deriv_out](Graph& gr, const Tensor& gout) {
        const Tensor& yv = gr.value(self);
        Tensor& buf = gr.grad_buffer(a.id());
        for (std::size_t i = 0; i < gout.size(); ++i) buf[i] += gout[i] * deriv_out(yv[i]);
    });
}

}  // namespace

// ---- matrix ops ----------------------------------------------------------

Var matmul(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || (bv.rank() != 1 && bv.rank() != 2) || av.dim(1) != bv.dim(0)) {
        throw DimensionError(two_shapes("matmul", a, b));
    }
    const std::size_t m = av.dim(0), k = av.dim(1);
    const std::size_t n = bv.rank() == 2 ? bv.dim(1) : 1;
    Tensor out = bv.rank() == 2 ? Tensor({m, n}) : Tensor({m});
    kernels::gemm(av.data(), m, k, bv.data(), n, out.data());
    const Var ops[] = {a, b};
    return g.record(std::move(out), ops, [a, b, m, k, n](Graph& gr, const Tensor& gout) {
        const Tensor& A = gr.value(a.id());
        const Tensor& B = gr.value(b.id());
        if (needs(gr, a)) {
            Tensor& ga = gr.grad_buffer(a.id());
            // dA = G B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += gout[i * n + j] * B[p * n + j];
                    ga[i * k + p] += s;
                }
        }
        if (needs(gr, b)) {
            Tensor& gb = gr.grad_buffer(b.id());
            // dB = A^T G
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < m; ++i) s += A[i * k + p] * gout[i * n + j];
                    gb[p * n + j] += s;
                }
        }
    });
}

namespace {

void check_affine_term(Var w, Var x) {
    const Tensor& wv = w.value();
    const Tensor& xv = x.value();
    if (wv.rank() != 2 || xv.rank() != 1 || wv.dim(1) != xv.dim(0)) {
        throw DimensionError(two_shapes("affine", w, x));
    }
}

void affine_term_backward(Graph& gr, Var w, Var x, const Tensor& gout) {
    const Tensor& W = gr.value(w.id());
    const Tensor& X = gr.value(x.id());
    const std::size_t rows = W.dim(0), cols = W.dim(1);
    if (needs(gr, w)) kernels::ger_acc(gout.data(), rows, X.data(), cols, gr.grad_buffer(w.id()).data());
    if (needs(gr, x)) kernels::gemv_t_acc(W.data(), rows, cols, gout.data(), gr.grad_buffer(x.id()).data());
}

void bias_backward(Graph& gr, Var b, const Tensor& gout) {
    if (!needs(gr, b)) return;
    Tensor& gb = gr.grad_buffer(b.id());
    for (std::size_t i = 0; i < gout.size(); ++i) gb[i] += gout[i];
}

}  // namespace

Var affine(Var w, Var x, Var b) {
    Graph& g = same_graph(w, x);
    same_graph(w, b);
    check_affine_term(w, x);
    const Tensor& W = w.value();
    const std::size_t rows = W.dim(0);
    if (b.value().rank() != 1 || b.size() != rows) throw DimensionError(two_shapes("affine bias", w, b));
    Tensor out({rows});
    kernels::gemv(W.data(), rows, W.dim(1), x.value().data(), out.data());
    const Tensor& B = b.value();
    for (std::size_t i = 0; i < rows; ++i) out[i] = out[i] + B[i];
    const Var ops[] = {w, x, b};
    return g.record(std::move(out), ops, [w, x, b](Graph& gr, const Tensor& gout) {
        affine_term_backward(gr, w, x, gout);
        bias_backward(gr, b, gout);
    });
}

Var affine(Var w1, Var x1, Var w2, Var x2, Var b) {
    Graph& g = same_graph(w1, x1);
    same_graph(w1, w2);
    same_graph(w1, x2);
    same_graph(w1, b);
    check_affine_term(w1, x1);
    check_affine_term(w2, x2);
    const std::size_t rows = w1.value().dim(0);
    if (w2.value().dim(0) != rows) throw DimensionError(two_shapes("affine", w1, w2));
    if (b.value().rank() != 1 || b.size() != rows) throw DimensionError(two_shapes("affine bias", w1, b));
    Tensor out({rows});
    std::vector<double> second(rows);
    kernels::gemv(w1.value().data(), rows, w1.value().dim(1), x1.value().data(), out.data());
    kernels::gemv(w2.value().data(), rows, w2.value().dim(1), x2.value().data(), second.data());
    const Tensor& B = b.value();
    for (std::size_t i = 0; i < rows; ++i) out[i] = (out[i] + second[i]) + B[i];
    const Var ops[] = {w1, x1, w2, x2, b};
    return g.record(std::move(out), ops, [w1, x1, w2, x2, b](Graph& gr, const Tensor& gout) {
        affine_term_backward(gr, w1, x1, gout);
        affine_term_backward(gr, w2, x2, gout);
        bias_backward(gr, b, gout);
    });
}

// ---- elementwise ---------------------------------------------------------

Var add(Var a, Var b) {
    Graph& g = same_graph(a, b);
    Tensor out(broadcast_shape("add", a, b));
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[av.size() == 1 ? 0 : i] + bv[bv.size() == 1 ? 0 : i];
    const Var ops[] = {a, b};
    return g.record(std::move(out), ops, [a, b](Graph& gr, const Tensor& gout) {
        if (needs(gr, a)) accumulate_broadcast(gr, a, gout);
        if (needs(gr, b)) accumulate_broadcast(gr, b, gout);
    });
}

Var sub(Var a, Var b) {
    Graph& g = same_graph(a, b);
    Tensor out(broadcast_shape("sub", a, b));
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[av.size() == 1 ? 0 : i] - bv[bv.size() == 1 ? 0 : i];
    const Var ops[] = {a, b};
    return g.record(std::move(out), ops, [a, b](Graph& gr, const Tensor& gout) {
        if (needs(gr, a)) accumulate_broadcast(gr, a, gout);
        if (needs(gr, b)) {
            Tensor neg = gout;
            for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
            accumulate_broadcast(gr, b, neg);
        }
    });
}

Var mul(Var a, Var b) {
    Graph& g = same_graph(a, b);
    Tensor out(broadcast_shape("mul", a, b));
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = av[av.size() == 1 ? 0 : i] * bv[bv.size() == 1 ? 0 : i];
    const Var ops[] = {a, b};
    return g.record(std::move(out), ops, [a, b](Graph& gr, const Tensor& gout) {
        const Tensor& A = gr.value(a.id());
        const Tensor& B = gr.value(b.id());
        if (needs(gr, a)) {
            Tensor c(gout.shape());
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = gout[i] * B[B.size() == 1 ? 0 : i];
            accumulate_broadcast(gr, a, c);
        }
        if (needs(gr, b)) {
            Tensor c(gout.shape());
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = gout[i] * A[A.size() == 1 ? 0 : i];
            accumulate_broadcast(gr, b, c);
        }
    });
}

Var mul_const(Var a, const Tensor& c) {
    if (!a.value().same_shape(c)) {
        throw DimensionError("mul_const: shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(c.shape()));
    }
    Graph& g = a.graph();
    Tensor out(a.shape());
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * c[i];
    const Var ops[] = {a};
    return g.record(std::move(out), ops, [a, c](Graph& gr, const Tensor& gout) {
        Tensor& buf = gr.grad_buffer(a.id());
        for (std::size_t i = 0; i < gout.size(); ++i) buf[i] += gout[i] * c[i];
    });
}

Var scale(Var a, double c) {
    return unary(a, [c](double x) { return x * c; }, [c](double) { return c; });
}

Var add_scalar(Var a, double c) {
    return unary(a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Var tanh(Var a) {
    return unary_out(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
    return unary_out(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                     [](double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var abs(Var a) {
    return unary(a, [](double x) { return std::fabs(x); },
                 [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
    return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var log_clamped(Var a, double floor) {
    return unary(a, [floor](double x) { return std::log(std::max(x, floor)); },
                 [floor](double x) { return x > floor ? 1.0 / x : 0.0; });
}

// ---- reductions and reshapes ---------------------------------------------

Var softmax(Var v) {
    Graph& g = v.graph();
    const Tensor& x = v.value();
    if (x.rank() != 1) throw DimensionError("softmax expects a vector, got " + shape_string(x.shape()));
    const std::size_t n = x.size();
    const double mx = *std::max_element(x.values().begin(), x.values().end());
    Tensor out({n});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - mx);
        total += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = out[i] / total;
    const Var ops[] = {v};
    const auto self = static_cast<std::uint32_t>(g.size());
    return g.record(std::move(out), ops, [v, self](Graph& gr, const Tensor& gout) {
        const Tensor& y = gr.value(self);
        double inner = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) inner += gout[i] * y[i];
        Tensor& buf = gr.grad_buffer(v.id());
        for (std::size_t i = 0; i < y.size(); ++i) buf[i] += y[i] * (gout[i] - inner);
    });
}

Var sum(Var a) {
    Graph& g = a.graph();
    const Tensor& x = a.value();
    double s = 0.0;
    for (double e : x.values()) s += e;
    const Var ops[] = {a};
    return g.record(Tensor::scalar(s), ops, [a](Graph& gr, const Tensor& gout) {
        Tensor& buf = gr.grad_buffer(a.id());
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += gout[0];
    });
}

Var dot(Var a, Var b) {
    Graph& g = same_graph(a, b);
    if (a.value().rank() != 1 || a.shape() != b.shape()) throw DimensionError(two_shapes("dot", a, b));
    const double s = kernels::serial::dot(a.value().data(), b.value().data(), a.size());
    const Var ops[] = {a, b};
    return g.record(Tensor::scalar(s), ops, [a, b](Graph& gr, const Tensor& gout) {
        const Tensor& A = gr.value(a.id());
        const Tensor& B = gr.value(b.id());
        if (needs(gr, a)) {
            Tensor& buf = gr.grad_buffer(a.id());
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += gout[0] * B[i];
        }
        if (needs(gr, b)) {
            Tensor& buf = gr.grad_buffer(b.id());
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += gout[0] * A[i];
        }
    });
}

Var pick(Var a, std::size_t i) {
    if (i >= a.size()) {
        throw DimensionError("pick: index " + std::to_string(i) + " out of range for " + shape_string(a.shape()));
    }
    Graph& g = a.graph();
    const Var ops[] = {a};
    return g.record(Tensor::scalar(a.value()[i]), ops, [a, i](Graph& gr, const Tensor& gout) {
        gr.grad_buffer(a.id())[i] += gout[0];
    });
}

Var repeat_each(Var a, std::size_t repeats) {
    if (repeats == 0) throw ContractError("repeat_each: repeats must be positive");
    Graph& g = a.graph();
    const Tensor& x = a.value();
    Tensor out({x.size() * repeats});
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t r = 0; r < repeats; ++r) out[i * repeats + r] = x[i];
    const Var ops[] = {a};
    return g.record(std::move(out), ops, [a, repeats](Graph& gr, const Tensor& gout) {
        Tensor& buf = gr.grad_buffer(a.id());
        for (std::size_t i = 0; i < buf.size(); ++i) {
            double s = 0.0;
            for (std::size_t r = 0; r < repeats; ++r) s += gout[i * repeats + r];
            buf[i] += s;
        }
    });
}

Var add_n(std::span<const Var> terms) {
    if (terms.empty()) throw ContractError("add_n: no terms");
    Graph& g = terms.front().graph();
    const Shape& shape = terms.front().shape();
    Tensor out(shape, 0.0);
    for (const Var& t : terms) {
        if (t.shape() != shape) throw DimensionError(two_shapes("add_n", terms.front(), t));
        const Tensor& v = t.value();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    }
    std::vector<Var> ops(terms.begin(), terms.end());
    return g.record(std::move(out), ops, [ops](Graph& gr, const Tensor& gout) {
        for (const Var& t : ops) {
            if (!needs(gr, t)) continue;
            Tensor& buf = gr.grad_buffer(t.id());
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += gout[i];
        }
    });
}

}  // namespace sta::ad
