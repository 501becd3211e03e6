#include "sta/lstm.hpp"

#include <string>

#include "sta/errors.hpp"

namespace sta {

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
    LstmParams p;
    for (std::size_t g = 0; g < kGateCount; ++g) {
        p.wx[g] = Tensor({hidden_size, input_size});
        p.wh[g] = Tensor({hidden_size, hidden_size});
        p.b[g] = Tensor({hidden_size});
    }
    return p;
}

void LstmParams::validate() const {
    const std::size_t h = hidden_size();
    const std::size_t d = input_size();
    for (std::size_t g = 0; g < kGateCount; ++g) {
        if (wx[g].shape() != Shape{h, d} || wh[g].shape() != Shape{h, h} || b[g].shape() != Shape{h}) {
            throw DimensionError("lstm gate " + std::to_string(g) + " disagrees with H=" + std::to_string(h) +
                                 ", D=" + std::to_string(d));
        }
    }
}

LstmVars bind(ad::Graph& g, const LstmParams& p, bool requires_grad) {
    p.validate();
    LstmVars v;
    for (std::size_t k = 0; k < kGateCount; ++k) {
        v.wx[k] = g.param(p.wx[k], requires_grad);
        v.wh[k] = g.param(p.wh[k], requires_grad);
        v.b[k] = g.param(p.b[k], requires_grad);
    }
    return v;
}

LstmState zero_state(ad::Graph& g, std::size_t hidden_size) {
    return {g.input(Tensor({hidden_size})), g.input(Tensor({hidden_size}))};
}

LstmState lstm_step(const LstmVars& p, ad::Var x, const LstmState& s) {
    if (x.shape() != Shape{p.input_size()}) {
        throw DimensionError("lstm_step: input " + shape_string(x.shape()) + " vs D=" +
                             std::to_string(p.input_size()));
    }
    if (s.h.shape() != Shape{p.hidden_size()} || s.c.shape() != Shape{p.hidden_size()}) {
        throw DimensionError("lstm_step: state " + shape_string(s.h.shape()) + " vs H=" +
                             std::to_string(p.hidden_size()));
    }
    auto pre = [&](Gate k) { return ad::affine(p.wx[k], x, p.wh[k], s.h, p.b[k]); };
    const ad::Var i = ad::sigmoid(pre(kInputGate));
    const ad::Var f = ad::sigmoid(pre(kForgetGate));
    const ad::Var candidate = ad::tanh(pre(kCellGate));
    const ad::Var o = ad::sigmoid(pre(kOutputGate));
    const ad::Var c = f * s.c + i * candidate;
    const ad::Var h = o * ad::tanh(c);
    return {h, c};
}

std::vector<LstmState> lstm_layer(const LstmVars& p, std::span<const ad::Var> xs, const LstmState& init) {
    if (xs.empty()) throw ContractError("lstm_layer: empty input sequence");
    std::vector<LstmState> states;
    states.reserve(xs.size());
    LstmState s = init;
    for (const ad::Var& x : xs) {
        s = lstm_step(p, x, s);
        states.push_back(s);
    }
    return states;
}

std::vector<ad::Var> lstm_stack(std::span<const LstmVars> layers, std::span<const ad::Var> xs, double dropout_rate,
                                bool training, std::mt19937_64* rng) {
    if (layers.empty()) throw ContractError("lstm_stack: no layers");
    if (xs.empty()) throw ContractError("lstm_stack: empty input sequence");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ContractError("lstm_stack: dropout rate must be in [0,1)");
    for (std::size_t l = 1; l < layers.size(); ++l) {
        if (layers[l].input_size() != layers[l - 1].hidden_size()) {
            throw DimensionError("lstm_stack: layer " + std::to_string(l) + " expects input " +
                                 std::to_string(layers[l].input_size()) + " but layer below has H=" +
                                 std::to_string(layers[l - 1].hidden_size()));
        }
    }
    const bool drop = training && dropout_rate > 0.0;
    if (drop && rng == nullptr) throw ContractError("lstm_stack: dropout needs a random generator");
    ad::Graph& g = xs.front().graph();

    std::vector<ad::Var> current(xs.begin(), xs.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto states = lstm_layer(layers[l], current, zero_state(g, layers[l].hidden_size()));
        const bool feeds_next = l + 1 < layers.size();
        for (std::size_t t = 0; t < states.size(); ++t) {
            ad::Var h = states[t].h;
            if (drop && feeds_next) {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                Tensor mask(h.shape());
                const double keep = 1.0 / (1.0 - dropout_rate);
                for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = u(*rng) >= dropout_rate ? keep : 0.0;
                h = ad::mul_const(h, mask);
            }
            current[t] = h;
        }
    }
    return current;
}

ad::Var rnn_step(ad::Var wx, ad::Var wh, ad::Var b, ad::Var x, ad::Var h) {
    return ad::tanh(ad::affine(wx, x, wh, h, b));
}

}  // namespace sta
