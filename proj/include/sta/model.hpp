#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sta/attention.hpp"
#include "sta/autodiff.hpp"
#include "sta/dataset.hpp"
#include "sta/lstm.hpp"
#include "sta/tensor.hpp"

namespace sta {

/// The three separately trainable networks. The class projection belongs to
/// the main network.
enum class ParamGroup { kMain = 0, kSpatial = 1, kTemporal = 2 };
inline constexpr std::size_t kGroupCount = 3;
const char* group_name(ParamGroup g);

/// Set of groups, used for trainable/frozen masks.
struct GroupMask {
    bool main = false;
    bool spatial = false;
    bool temporal = false;

    static GroupMask all() { return {true, true, true}; }
    static GroupMask none() { return {}; }
    bool contains(ParamGroup g) const;
    bool operator==(const GroupMask&) const = default;
};

struct ModelShape {
    std::size_t joints = 30;
    std::size_t persons = 2;
    std::size_t classes = 8;
    std::size_t main_hidden = 100;
    std::size_t main_layers = 3;
    std::size_t spatial_hidden = 100;
    std::size_t score_hidden = 100;  // H_a, the tanh bottleneck of the score head
    std::size_t temporal_hidden = 100;

    std::size_t input_size() const { return joints * kCoordsPerJoint; }
};

struct ParamRef {
    std::string name;
    ParamGroup group;
    bool is_weight;  // connection matrix/vector, as opposed to a bias
    Tensor* tensor;
};

struct ConstParamRef {
    std::string name;
    ParamGroup group;
    bool is_weight;
    const Tensor* tensor;
};

/// Spatial subnetwork -> main LSTM stack -> per-frame class scores -> temporal fusion.
struct STAModel {
    ModelShape shape;
    SpatialAttnParams spatial;
    TemporalAttnParams temporal;
    std::vector<LstmParams> main;
    Tensor proj_w;  // C x H
    Tensor proj_b;  // C
    bool spatial_bypass = false;   // alpha fixed to ones
    bool temporal_bypass = false;  // beta fixed to ones

    static STAModel zeros(const ModelShape& shape);

    std::size_t joints() const { return spatial.joints(); }
    std::size_t classes() const { return proj_w.dim(0); }
    std::size_t input_size() const { return spatial.input_size(); }

    /// Throws DimensionError if any part disagrees with the rest.
    void validate() const;

    /// Every parameter tensor with a stable name, in a fixed order.
    std::vector<ParamRef> parameters();
    std::vector<ConstParamRef> parameters() const;

    /// Bitwise digest of one parameter group.
    std::uint64_t digest(ParamGroup g) const;
    /// False for an attention network under bypass.
    bool group_active(ParamGroup g) const;
    bool identical(const STAModel& other) const;
};

/// Weights ~ N(0, stddev^2), biases zero.
void init_gaussian(Tensor& t, std::mt19937_64& rng, double stddev);
void init_lstm(LstmParams& p, std::mt19937_64& rng, double stddev);
STAModel init_params(const ModelShape& shape, std::uint64_t seed, double stddev = 0.1);
/// Same as above, drawing from a caller-owned generator.
STAModel init_params(const ModelShape& shape, std::mt19937_64& rng, double stddev = 0.1);

/// Model parameters bound as leaves of one graph.
struct BoundModel {
    std::vector<LstmVars> main;
    SpatialAttnVars spatial;
    TemporalAttnVars temporal;
    ad::Var proj_w, proj_b;
    /// Leaves in STAModel::parameters() order.
    std::vector<ad::Var> leaves;
};

BoundModel bind(ad::Graph& g, const STAModel& m, const GroupMask& trainable);

struct AttentionTrace {
    std::size_t frames = 0;
    std::size_t joints = 0;
    std::vector<double> alphas;  // frames x joints
    std::vector<double> betas;   // frames
};

struct ForwardOptions {
    bool training = false;
    double dropout = 0.0;
    std::mt19937_64* rng = nullptr;
};

struct ForwardGraph {
    ad::Var o;                    // fused class scores [C]
    ad::Var p;                    // class probabilities [C]
    std::vector<ad::Var> alphas;  // per valid frame, empty under spatial bypass
    std::vector<ad::Var> betas;   // per valid frame, empty under temporal bypass
    AttentionTrace trace;
};

/// Differentiable forward pass over the valid frames of `seq`.
ForwardGraph forward(ad::Graph& g, const STAModel& m, const BoundModel& vars, const SkeletonSequence& seq,
                     const ForwardOptions& opts = {});

struct Prediction {
    std::vector<double> o;
    std::vector<double> p;
    AttentionTrace trace;
};

/// Inference-mode forward (no dropout, no gradients).
Prediction forward(const STAModel& m, const SkeletonSequence& seq);
/// Index of the largest probability; ties go to the smallest index.
std::size_t argmax(std::span<const double> p);
std::size_t predict(const STAModel& m, const SkeletonSequence& seq);

/// Replaces the main stack by `layers` layers: layer 0 is kept bitwise, the
/// rest are freshly drawn. The projection is kept when the top width is unchanged.
void grow_main(STAModel& m, std::size_t layers, std::mt19937_64& rng, double stddev = 0.1);
/// Fresh Gaussian main stack (and projection) with `layers` layers.
void reset_main(STAModel& m, std::size_t layers, std::mt19937_64& rng, double stddev = 0.1);

}  // namespace sta
