#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sta/dataset.hpp"
#include "sta/model.hpp"
#include "sta/objective.hpp"

namespace sta {

// ---- Adam --------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates indexed like STAModel::parameters().
struct AdamState {
    AdamConfig cfg;
    std::size_t step_count = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState for_model(const STAModel& model, AdamConfig cfg = {});
};

/// Bias-corrected Adam update of every parameter whose group is trainable.
/// `grads` is indexed like the parameters; entries of frozen groups are ignored.
/// Throws NumericError naming the group if a trainable gradient is non-finite.
void adam_step(AdamState& state, std::span<const ParamRef> params, std::span<const Tensor> grads,
               const GroupMask& trainable);

/// Scales the trainable gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, std::span<const ParamRef> params, const GroupMask& trainable,
                        double max_norm);

// ---- batch gradients -------------------------------------------------------

struct BatchResult {
    /// Indexed like STAModel::parameters(); frozen groups hold zeros.
    std::vector<Tensor> grads;
    double loss = 0.0;  // mean per-sequence loss + lambda3 * reg3
    double ce = 0.0;    // batch means of the unweighted terms
    double reg1 = 0.0;
    double reg2 = 0.0;
    double reg3 = 0.0;  // L1 of all connection weights, once per batch
};

struct BatchOptions {
    bool training = true;
    double dropout = 0.0;
    /// Dropout masks for batch slot i are drawn from a generator seeded with mix(dropout_seed, i).
    std::uint64_t dropout_seed = 0;
};

/// Serial reference: sequences processed one after another.
BatchResult batch_gradient_serial(const STAModel& model, std::span<const SkeletonSequence* const> batch,
                                  const LossConfig& loss, const GroupMask& trainable, const BatchOptions& opts);
/// One graph per sequence, sequences spread over OpenMP threads. Per-sequence
/// results are reduced in batch order, so the result is bitwise identical to
/// the serial reference.
BatchResult batch_gradient_parallel(const STAModel& model, std::span<const SkeletonSequence* const> batch,
                                    const LossConfig& loss, const GroupMask& trainable, const BatchOptions& opts);

// ---- staged schedule -------------------------------------------------------

enum class MainInit {
    kKeep,   // main stack must already have the stage's layer count
    kGrow,   // keep layer 0 bitwise, draw the added layers
    kReset,  // fresh main stack and projection
};

struct Stage {
    int step = 0;  // step number of the joint training procedure (2..9)
    std::string name;
    GroupMask trainable;
    bool spatial_bypass = false;
    bool temporal_bypass = false;
    std::size_t main_layers = 1;
    MainInit main_init = MainInit::kKeep;
    std::size_t iterations = 0;
};

enum class Variant { kLstm, kSa, kTa, kSta };
const char* variant_name(Variant v);
std::optional<Variant> parse_variant(const std::string& s);

struct TrainPlan {
    std::vector<Stage> stages;
    std::size_t n1 = 1000;
    std::size_t n2 = 500;

    /// Steps 2-9: temporal pretraining, spatial pretraining, main fine-tune, joint fine-tune.
    static TrainPlan joint(std::size_t n1, std::size_t n2, std::size_t main_layers = 3);
    /// The stages each ablation variant runs.
    static TrainPlan for_variant(Variant v, std::size_t n1, std::size_t n2, std::size_t main_layers = 3);
};

struct TrainConfig {
    ModelShape shape;  // main_layers is the final depth; the plan decides the starting depth
    LossConfig loss;
    AdamConfig adam;
    std::size_t batch_size = 8;
    double dropout = 0.5;
    double clip_norm = 5.0;  // <= 0 disables clipping
    double init_stddev = 0.1;
    /// Frame-gate bias after initialization; 1 starts every beta near 1 (sum pooling).
    double temporal_gate_bias = 1.0;
    bool parallel = true;
};

struct LossRecord {
    std::size_t iteration = 0;  // 1-based, counted across stages
    int stage = 0;
    double loss = 0.0, ce = 0.0, reg1 = 0.0, reg2 = 0.0, reg3 = 0.0;
};

struct StageReport {
    Stage stage;
    std::size_t iterations_run = 0;
    /// Digests after stage setup and after the last iteration, by ParamGroup.
    std::uint64_t digest_before[kGroupCount] = {};
    std::uint64_t digest_after[kGroupCount] = {};
    /// Main layer 0 before and after a kGrow setup.
    std::optional<std::uint64_t> layer0_before_grow, layer0_after_grow;

    bool frozen_groups_unchanged() const;
};

/// Mutable trainer state carried across stages: the seeded generator for
/// initialization and data order, the epoch permutation, and the loss trace.
struct Trainer {
    explicit Trainer(std::uint64_t seed) : seed(seed), rng(seed) {}

    std::uint64_t seed;
    std::mt19937_64 rng;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::size_t iteration = 0;
    std::vector<LossRecord> trace;

    /// Next minibatch indices; reshuffles at every epoch boundary.
    std::vector<std::size_t> next_batch(std::size_t dataset_size, std::size_t batch_size);
};

struct StageResult {
    StageReport report;
    AdamState adam;
};

/// Sets up the stage (bypass flags, main stack depth) and runs its iteration
/// budget of minibatch Adam updates on the trainable groups.
StageResult run_stage(const Stage& stage, STAModel& model, std::span<const SkeletonSequence> data,
                      const TrainConfig& cfg, Trainer& trainer);

struct StageCheckpoint {
    StageReport report;
    STAModel model;
    AdamState adam;
};

struct TrainResult {
    STAModel model;
    std::vector<StageCheckpoint> checkpoints;
    std::vector<LossRecord> trace;
};

/// Gaussian initialization followed by every stage of `plan`, emitting a
/// checkpoint after each stage. Deterministic for a given seed.
TrainResult joint_train(std::span<const SkeletonSequence> data, const TrainConfig& cfg, const TrainPlan& plan,
                        std::uint64_t seed, const std::function<void(const StageCheckpoint&)>& on_stage = {});

// ---- evaluation --------------------------------------------------------------

struct EvalSummary {
    double accuracy = 0.0;
    double mean_loss = 0.0;  // inference-mode, same composition as the training loss
    std::vector<std::size_t> predictions;
};

EvalSummary evaluate(const STAModel& model, std::span<const SkeletonSequence> data, const LossConfig& loss);

}  // namespace sta
