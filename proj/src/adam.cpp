#include <cmath>
#include <string>

#include "sta/errors.hpp"
#include "sta/trainer.hpp"

namespace sta {

AdamState AdamState::for_model(const STAModel& model, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    for (const auto& p : model.parameters()) {
        s.m.emplace_back(p.tensor->shape(), 0.0);
        s.v.emplace_back(p.tensor->shape(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, std::span<const ParamRef> params, std::span<const Tensor> grads,
               const GroupMask& trainable) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                             std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                             " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable.contains(params[i].group)) continue;
        if (!grads[i].same_shape(*params[i].tensor) || !state.m[i].same_shape(*params[i].tensor)) {
            throw DimensionError("adam_step: shape mismatch for " + params[i].name);
        }
        for (double g : grads[i].values()) {
            if (!std::isfinite(g)) {
                throw NumericError(std::string("non-finite gradient in parameter group '") +
                                   group_name(params[i].group) + "' (" + params[i].name + ")");
            }
        }
    }

    ++state.step_count;
    const auto& c = state.cfg;
    const double t = static_cast<double>(state.step_count);
    const double correct1 = 1.0 - std::pow(c.beta1, t);
    const double correct2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable.contains(params[i].group)) continue;
        Tensor& w = *params[i].tensor;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correct1;
            const double v_hat = v[j] / correct2;
            w[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

double clip_global_norm(std::span<Tensor> grads, std::span<const ParamRef> params, const GroupMask& trainable,
                        double max_norm) {
    double sq = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!trainable.contains(params[i].group)) continue;
        for (double g : grads[i].values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && std::isfinite(norm) && norm > max_norm) {
        const double factor = max_norm / norm;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (!trainable.contains(params[i].group)) continue;
            for (double& g : grads[i].values()) g *= factor;
        }
    }
    return norm;
}

}  // namespace sta
