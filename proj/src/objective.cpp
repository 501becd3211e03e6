#include "sta/objective.hpp"

#include <cmath>
#include <string>

#include "sta/errors.hpp"

namespace sta {

LossConfig LossConfig::without_attention_reg(LossConfig base) {
    base.spatial_reg = false;
    base.temporal_reg = false;
    return base;
}

void LossConfig::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3 >= 0.0)) {
        throw ContractError("regularizer weights must be nonnegative");
    }
}

ad::Var cross_entropy(ad::Var p, std::size_t label) {
    if (label >= p.size()) {
        throw ContractError("label " + std::to_string(label) + " out of range for " + std::to_string(p.size()) +
                            " classes");
    }
    return ad::scale(ad::log_clamped(ad::pick(p, label), kProbFloor), -1.0);
}

ad::Var spatial_reg(std::span<const ad::Var> alphas) {
    if (alphas.empty()) throw ContractError("spatial_reg: no frames");
    const double frames = static_cast<double>(alphas.size());
    const ad::Var mean = ad::scale(ad::add_n(alphas), 1.0 / frames);
    // (1 - m)^2 == (m - 1)^2
    return ad::sum(ad::square(ad::add_scalar(mean, -1.0)));
}

ad::Var temporal_reg(std::span<const ad::Var> betas) {
    if (betas.empty()) throw ContractError("temporal_reg: no frames");
    std::vector<ad::Var> norms;
    norms.reserve(betas.size());
    for (const auto& b : betas) norms.push_back(ad::abs(b));
    return ad::scale(ad::add_n(norms), 1.0 / static_cast<double>(betas.size()));
}

ad::Var l1_penalty(std::span<const ad::Var> weights) {
    if (weights.empty()) throw ContractError("l1_penalty: no weights");
    std::vector<ad::Var> parts;
    parts.reserve(weights.size());
    for (const auto& w : weights) parts.push_back(ad::sum(ad::abs(w)));
    return ad::add_n(parts);
}

double spatial_reg(std::span<const double> alphas, std::size_t frames, std::size_t joints) {
    if (frames == 0 || alphas.size() != frames * joints) throw ContractError("spatial_reg: bad alpha matrix");
    double total = 0.0;
    for (std::size_t k = 0; k < joints; ++k) {
        double col = 0.0;
        for (std::size_t t = 0; t < frames; ++t) col += alphas[t * joints + k];
        const double d = 1.0 - col / static_cast<double>(frames);
        total += d * d;
    }
    return total;
}

double temporal_reg(std::span<const double> betas) {
    if (betas.empty()) throw ContractError("temporal_reg: no frames");
    double s = 0.0;
    for (double b : betas) s += std::fabs(b);
    return s / static_cast<double>(betas.size());
}

double l1_penalty(const STAModel& m) {
    double s = 0.0;
    for (const auto& p : m.parameters()) {
        if (!p.is_weight || !m.group_active(p.group)) continue;
        for (double v : p.tensor->values()) s += std::fabs(v);
    }
    return s;
}

std::vector<ad::Var> weight_leaves(const STAModel& m, const BoundModel& vars) {
    const auto refs = m.parameters();
    std::vector<ad::Var> out;
    for (std::size_t i = 0; i < refs.size(); ++i)
        if (refs[i].is_weight && m.group_active(refs[i].group)) out.push_back(vars.leaves[i]);
    return out;
}

LossTerms total_loss(const ForwardGraph& fwd, std::size_t label, const STAModel& m, const BoundModel& vars,
                     const LossConfig& cfg, bool include_l1) {
    cfg.validate();
    ad::Graph& g = fwd.p.graph();
    LossTerms t;
    t.ce = cross_entropy(fwd.p, label);
    std::vector<ad::Var> parts{t.ce};
    auto zero = [&] { return g.input(Tensor::scalar(0.0)); };

    t.reg1 = fwd.alphas.empty() ? zero() : spatial_reg(fwd.alphas);
    if (cfg.spatial_reg && !fwd.alphas.empty()) parts.push_back(ad::scale(t.reg1, cfg.lambda1));

    t.reg2 = fwd.betas.empty() ? zero() : temporal_reg(fwd.betas);
    if (cfg.temporal_reg && !fwd.betas.empty()) parts.push_back(ad::scale(t.reg2, cfg.lambda2));

    if (include_l1) {
        t.reg3 = l1_penalty(weight_leaves(m, vars));
        if (cfg.l1_reg) parts.push_back(ad::scale(t.reg3, cfg.lambda3));
    } else {
        t.reg3 = zero();
    }
    t.total = ad::add_n(parts);
    return t;
}

}  // namespace sta
