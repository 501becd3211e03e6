#pragma once

#include <cstddef>
#include <span>

#include "sta/autodiff.hpp"
#include "sta/model.hpp"

namespace sta {

/// Weights of the regularized cross-entropy. A disabled term contributes 0.
struct LossConfig {
    double lambda1 = 0.001;    // spatial: joint attention spread
    double lambda2 = 0.0001;   // temporal: size of beta
    double lambda3 = 0.0005;   // L1 on connection weights
    bool spatial_reg = true;
    bool temporal_reg = true;
    bool l1_reg = true;

    static LossConfig sbu() { return LossConfig(); }
    static LossConfig ntu() { return {0.01, 0.001, 0.00005, true, true, true}; }
    /// Cross-entropy plus the L1 term only.
    static LossConfig without_attention_reg(LossConfig base);

    void validate() const;
};

/// Probability floor applied before the log.
inline constexpr double kProbFloor = 1e-12;

/// -log max(p[label], 1e-12).
ad::Var cross_entropy(ad::Var p, std::size_t label);

/// sum_k (1 - mean_t alpha_{t,k})^2 over the given (valid) frames.
ad::Var spatial_reg(std::span<const ad::Var> alphas);
/// mean_t |beta_t| over the given (valid) frames.
ad::Var temporal_reg(std::span<const ad::Var> betas);
/// sum of |w| over the given weight tensors.
ad::Var l1_penalty(std::span<const ad::Var> weights);

/// Plain evaluations of the same terms, used for reporting and as oracles.
double spatial_reg(std::span<const double> alphas, std::size_t frames, std::size_t joints);
double temporal_reg(std::span<const double> betas);
/// Connection weights of the main network and of every attention network not under bypass.
double l1_penalty(const STAModel& m);

/// The connection-weight leaves covered by l1_penalty (biases excluded).
std::vector<ad::Var> weight_leaves(const STAModel& m, const BoundModel& vars);

struct LossTerms {
    ad::Var total;
    ad::Var ce;
    ad::Var reg1;  // unweighted spatial term (0 under spatial bypass)
    ad::Var reg2;  // unweighted temporal term (0 under temporal bypass)
    ad::Var reg3;  // unweighted L1 term (0 when excluded)
};

/// CE + l1*reg1 + l2*reg2 [+ l3*reg3]. With include_l1 false the weight
/// penalty is left out, for batch training where it is added once per batch.
LossTerms total_loss(const ForwardGraph& fwd, std::size_t label, const STAModel& m, const BoundModel& vars,
                     const LossConfig& cfg, bool include_l1 = true);

}  // namespace sta
