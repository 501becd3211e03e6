#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sta/autodiff.hpp"
#include "sta/lstm.hpp"
#include "sta/tensor.hpp"

namespace sta {

inline constexpr std::size_t kCoordsPerJoint = 3;

/// Joint-selection subnetwork: an LSTM layer over raw frames plus a two-layer
/// score head s = U tanh(Wx x + Wh h + b) + b_u.
struct SpatialAttnParams {
    LstmParams lstm;  // hidden size H_s
    Tensor w_x;       // H_a x D
    Tensor w_h;       // H_a x H_s
    Tensor b;         // H_a
    Tensor u;         // K x H_a
    Tensor b_u;       // K

    static SpatialAttnParams zeros(std::size_t joints, std::size_t lstm_hidden, std::size_t score_hidden);

    std::size_t joints() const { return u.dim(0); }
    std::size_t input_size() const { return w_x.dim(1); }
    void validate() const;
};

/// Frame-selection subnetwork: an LSTM layer over raw frames plus
/// beta = relu(w_x . x + w_h . h + b).
struct TemporalAttnParams {
    LstmParams lstm;  // hidden size H_t
    Tensor w_x;       // D
    Tensor w_h;       // H_t
    Tensor b;         // scalar

    static TemporalAttnParams zeros(std::size_t input_size, std::size_t lstm_hidden);

    std::size_t input_size() const { return w_x.size(); }
    void validate() const;
};

struct SpatialAttnVars {
    LstmVars lstm;
    ad::Var w_x, w_h, b, u, b_u;
};

struct TemporalAttnVars {
    LstmVars lstm;
    ad::Var w_x, w_h, b;
};

SpatialAttnVars bind(ad::Graph& g, const SpatialAttnParams& p, bool requires_grad);
TemporalAttnVars bind(ad::Graph& g, const TemporalAttnParams& p, bool requires_grad);

/// Joint importance scores s_t [K] from the raw frame and the subnetwork's previous hidden state.
ad::Var spatial_scores(const SpatialAttnVars& p, ad::Var x, ad::Var h_prev);
/// alpha = softmax(s).
ad::Var joint_gate(ad::Var scores);
/// Scales each joint's three coordinates of the flat frame [3K] by its gate.
ad::Var modulate(ad::Var x, ad::Var alpha);
/// beta_t >= 0 from the raw frame and the subnetwork's previous hidden state.
ad::Var frame_gate(const TemporalAttnVars& p, ad::Var x, ad::Var h_prev);

/// Runs the spatial subnetwork over a sequence: at each step the gate is
/// computed from h_{t-1}, then the subnetwork LSTM advances on x_t.
std::vector<ad::Var> spatial_attention(const SpatialAttnVars& p, std::span<const ad::Var> xs);
/// Same recurrence for the temporal subnetwork; returns one scalar beta per frame.
std::vector<ad::Var> temporal_attention(const TemporalAttnVars& p, std::span<const ad::Var> xs);

}  // namespace sta
