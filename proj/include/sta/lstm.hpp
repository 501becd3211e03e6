#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "sta/autodiff.hpp"
#include "sta/tensor.hpp"

namespace sta {

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCellGate = 2, kOutputGate = 3 };
inline constexpr std::size_t kGateCount = 4;

/// Peephole-free LSTM layer. Gates are indexed by `Gate`.
struct LstmParams {
    std::array<Tensor, kGateCount> wx;  // H x D each
    std::array<Tensor, kGateCount> wh;  // H x H each
    std::array<Tensor, kGateCount> b;   // H each

    static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);

    std::size_t input_size() const { return wx[0].dim(1); }
    std::size_t hidden_size() const { return wx[0].dim(0); }
    /// Throws DimensionError unless all four gates agree on H and D.
    void validate() const;
};

/// LstmParams bound as leaves of a graph.
struct LstmVars {
    std::array<ad::Var, kGateCount> wx, wh, b;

    std::size_t input_size() const { return wx[0].shape()[1]; }
    std::size_t hidden_size() const { return wx[0].shape()[0]; }
};

LstmVars bind(ad::Graph& g, const LstmParams& p, bool requires_grad);

struct LstmState {
    ad::Var h;
    ad::Var c;
};

LstmState zero_state(ad::Graph& g, std::size_t hidden_size);

/// One time step: i, f, o = sigmoid(Wx x + Wh h + b), c' = f*c + i*tanh(...), h' = o*tanh(c').
LstmState lstm_step(const LstmVars& p, ad::Var x, const LstmState& s);

/// Folds lstm_step over xs, returning every intermediate state.
std::vector<LstmState> lstm_layer(const LstmVars& p, std::span<const ad::Var> xs, const LstmState& init);

/// Stacked LSTM from zero initial states; returns the top layer's hidden
/// sequence. Inverted dropout with `dropout_rate` is applied to the outputs of
/// every layer that feeds another layer, and only when `training` is set.
std::vector<ad::Var> lstm_stack(std::span<const LstmVars> layers, std::span<const ad::Var> xs, double dropout_rate,
                                bool training, std::mt19937_64* rng);

/// Plain recurrent cell h' = tanh(Wx x + Wh h + b), kept as a baseline.
ad::Var rnn_step(ad::Var wx, ad::Var wh, ad::Var b, ad::Var x, ad::Var h);

}  // namespace sta
