#include "sta/attention.hpp"

#include <string>

#include "sta/errors.hpp"

namespace sta {

SpatialAttnParams SpatialAttnParams::zeros(std::size_t joints, std::size_t lstm_hidden, std::size_t score_hidden) {
    const std::size_t d = joints * kCoordsPerJoint;
    SpatialAttnParams p;
    p.lstm = LstmParams::zeros(d, lstm_hidden);
    p.w_x = Tensor({score_hidden, d});
    p.w_h = Tensor({score_hidden, lstm_hidden});
    p.b = Tensor({score_hidden});
    p.u = Tensor({joints, score_hidden});
    p.b_u = Tensor({joints});
    return p;
}

void SpatialAttnParams::validate() const {
    lstm.validate();
    const std::size_t ha = w_x.dim(0);
    const std::size_t d = lstm.input_size();
    const std::size_t k = u.dim(0);
    if (w_x.shape() != Shape{ha, d} || w_h.shape() != Shape{ha, lstm.hidden_size()} || b.shape() != Shape{ha} ||
        u.shape() != Shape{k, ha} || b_u.shape() != Shape{k}) {
        throw DimensionError("spatial attention parameters have inconsistent shapes");
    }
    if (d != k * kCoordsPerJoint) {
        throw DimensionError("spatial attention: D=" + std::to_string(d) + " is not 3 x K=" + std::to_string(k));
    }
}

TemporalAttnParams TemporalAttnParams::zeros(std::size_t input_size, std::size_t lstm_hidden) {
    TemporalAttnParams p;
    p.lstm = LstmParams::zeros(input_size, lstm_hidden);
    p.w_x = Tensor({input_size});
    p.w_h = Tensor({lstm_hidden});
    p.b = Tensor({1});
    return p;
}

void TemporalAttnParams::validate() const {
    lstm.validate();
    if (w_x.shape() != Shape{lstm.input_size()} || w_h.shape() != Shape{lstm.hidden_size()} || b.shape() != Shape{1}) {
        throw DimensionError("temporal attention parameters have inconsistent shapes");
    }
}

SpatialAttnVars bind(ad::Graph& g, const SpatialAttnParams& p, bool requires_grad) {
    p.validate();
    return {bind(g, p.lstm, requires_grad), g.param(p.w_x, requires_grad), g.param(p.w_h, requires_grad),
            g.param(p.b, requires_grad),    g.param(p.u, requires_grad),   g.param(p.b_u, requires_grad)};
}

TemporalAttnVars bind(ad::Graph& g, const TemporalAttnParams& p, bool requires_grad) {
    p.validate();
    return {bind(g, p.lstm, requires_grad), g.param(p.w_x, requires_grad), g.param(p.w_h, requires_grad),
            g.param(p.b, requires_grad)};
}

ad::Var spatial_scores(const SpatialAttnVars& p, ad::Var x, ad::Var h_prev) {
    const ad::Var hidden = ad::tanh(ad::affine(p.w_x, x, p.w_h, h_prev, p.b));
    return ad::affine(p.u, hidden, p.b_u);
}

ad::Var joint_gate(ad::Var scores) {
    if (scores.size() == 0) throw DimensionError("joint_gate: empty scores");
    return ad::softmax(scores);
}

ad::Var modulate(ad::Var x, ad::Var alpha) {
    if (alpha.value().rank() != 1 || x.value().rank() != 1 || x.size() != alpha.size() * kCoordsPerJoint) {
        throw DimensionError("modulate: frame " + shape_string(x.shape()) + " does not hold 3 coordinates for " +
                             std::to_string(alpha.size()) + " joints");
    }
    return ad::mul(ad::repeat_each(alpha, kCoordsPerJoint), x);
}

ad::Var frame_gate(const TemporalAttnVars& p, ad::Var x, ad::Var h_prev) {
    const ad::Var pre = ad::add(ad::add(ad::dot(p.w_x, x), ad::dot(p.w_h, h_prev)), p.b);
    return ad::relu(pre);
}

std::vector<ad::Var> spatial_attention(const SpatialAttnVars& p, std::span<const ad::Var> xs) {
    if (xs.empty()) throw ContractError("spatial_attention: empty sequence");
    std::vector<ad::Var> alphas;
    alphas.reserve(xs.size());
    LstmState s = zero_state(xs.front().graph(), p.lstm.hidden_size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        alphas.push_back(joint_gate(spatial_scores(p, xs[t], s.h)));
        if (t + 1 < xs.size()) s = lstm_step(p.lstm, xs[t], s);
    }
    return alphas;
}

std::vector<ad::Var> temporal_attention(const TemporalAttnVars& p, std::span<const ad::Var> xs) {
    if (xs.empty()) throw ContractError("temporal_attention: empty sequence");
    std::vector<ad::Var> betas;
    betas.reserve(xs.size());
    LstmState s = zero_state(xs.front().graph(), p.lstm.hidden_size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        betas.push_back(frame_gate(p, xs[t], s.h));
        if (t + 1 < xs.size()) s = lstm_step(p.lstm, xs[t], s);
    }
    return betas;
}

}  // namespace sta
