#include "sta/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace sta {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::kLstm: return "lstm";
        case Variant::kSa: return "sa";
        case Variant::kTa: return "ta";
        case Variant::kSta: return "sta";
    }
    return "?";
}

std::optional<Variant> parse_variant(const std::string& s) {
    for (Variant v : {Variant::kLstm, Variant::kSa, Variant::kTa, Variant::kSta})
        if (s == variant_name(v)) return v;
    return std::nullopt;
}

TrainPlan TrainPlan::joint(std::size_t n1, std::size_t n2, std::size_t layers) {
    const GroupMask main_only{true, false, false};
    const GroupMask main_temporal{true, false, true};
    const GroupMask main_spatial{true, true, false};
    TrainPlan plan;
    plan.n1 = n1;
    plan.n2 = n2;
    plan.stages = {
        {2, "temporal-pretrain", main_temporal, true, false, 1, MainInit::kKeep, n1},
        {3, "temporal-main-deepen", main_only, true, false, layers, MainInit::kGrow, n1},
        {4, "temporal-finetune", main_temporal, true, false, layers, MainInit::kKeep, n2},
        {5, "spatial-pretrain", main_spatial, false, true, 1, MainInit::kReset, n1},
        {6, "spatial-main-deepen", main_only, false, true, layers, MainInit::kGrow, n1},
        {7, "spatial-finetune", main_spatial, false, true, layers, MainInit::kKeep, n2},
        {8, "main-finetune", main_only, false, false, layers, MainInit::kKeep, n1},
        {9, "joint-finetune", GroupMask::all(), false, false, layers, MainInit::kKeep, n2},
    };
    return plan;
}

TrainPlan TrainPlan::for_variant(Variant v, std::size_t n1, std::size_t n2, std::size_t layers) {
    TrainPlan plan = joint(n1, n2, layers);
    switch (v) {
        case Variant::kSta: break;
        case Variant::kTa: plan.stages.resize(3); break;
        case Variant::kSa:
            plan.stages = {plan.stages[3], plan.stages[4], plan.stages[5]};
            plan.stages.front().main_init = MainInit::kKeep;
            break;
        case Variant::kLstm:
            // One plain stage with the same update budget as an attention branch.
            plan.stages = {{1, "plain", GroupMask{true, false, false}, true, true, layers, MainInit::kKeep,
                            2 * n1 + n2}};
            break;
    }
    return plan;
}

bool StageReport::frozen_groups_unchanged() const {
    for (std::size_t g = 0; g < kGroupCount; ++g) {
        if (stage.trainable.contains(static_cast<ParamGroup>(g))) continue;
        if (digest_before[g] != digest_after[g]) return false;
    }
    return true;
}

std::vector<std::size_t> Trainer::next_batch(std::size_t dataset_size, std::size_t batch_size) {
    if (dataset_size == 0) throw ContractError("empty training set");
    if (batch_size == 0) throw ContractError("batch size must be positive");
    if (order.size() != dataset_size || cursor >= order.size()) {
        order.resize(dataset_size);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + batch_size);
    std::vector<std::size_t> out(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    cursor = end;
    return out;
}

namespace {

std::uint64_t layer0_digest(const STAModel& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const LstmParams& p = m.main.front();
    for (std::size_t k = 0; k < kGateCount; ++k) {
        h = fnv1a64(p.wx[k].values(), h);
        h = fnv1a64(p.wh[k].values(), h);
        h = fnv1a64(p.b[k].values(), h);
    }
    return h;
}

void setup_stage(const Stage& stage, STAModel& model, const TrainConfig& cfg, Trainer& trainer, StageReport& report) {
    model.spatial_bypass = stage.spatial_bypass;
    model.temporal_bypass = stage.temporal_bypass;
    switch (stage.main_init) {
        case MainInit::kKeep:
            if (model.main.size() != stage.main_layers) {
                throw ContractError("stage '" + stage.name + "' expects " + std::to_string(stage.main_layers) +
                                    " main layers, model has " + std::to_string(model.main.size()));
            }
            break;
        case MainInit::kGrow:
            report.layer0_before_grow = layer0_digest(model);
            grow_main(model, stage.main_layers, trainer.rng, cfg.init_stddev);
            report.layer0_after_grow = layer0_digest(model);
            break;
        case MainInit::kReset: reset_main(model, stage.main_layers, trainer.rng, cfg.init_stddev); break;
    }
    model.validate();
}

}  // namespace

StageResult run_stage(const Stage& stage, STAModel& model, std::span<const SkeletonSequence> data,
                      const TrainConfig& cfg, Trainer& trainer) {
    if (data.empty()) throw ContractError("run_stage: empty training set");
    cfg.loss.validate();
    StageResult result;
    result.report.stage = stage;
    setup_stage(stage, model, cfg, trainer, result.report);
    for (std::size_t g = 0; g < kGroupCount; ++g) result.report.digest_before[g] = model.digest(static_cast<ParamGroup>(g));

    result.adam = AdamState::for_model(model, cfg.adam);
    const bool anything_trainable = stage.trainable.main || stage.trainable.spatial || stage.trainable.temporal;

    for (std::size_t it = 0; it < stage.iterations; ++it) {
        ++trainer.iteration;
        const auto idx = trainer.next_batch(data.size(), cfg.batch_size);
        std::vector<const SkeletonSequence*> batch;
        batch.reserve(idx.size());
        for (std::size_t i : idx) batch.push_back(&data[i]);

        BatchOptions bo;
        bo.training = true;
        bo.dropout = cfg.dropout;
        bo.dropout_seed = trainer.seed * 0x9e3779b97f4a7c15ULL + trainer.iteration;
        try {
            BatchResult br = cfg.parallel ? batch_gradient_parallel(model, batch, cfg.loss, stage.trainable, bo)
                                          : batch_gradient_serial(model, batch, cfg.loss, stage.trainable, bo);
            if (!std::isfinite(br.loss)) throw NumericError("non-finite loss");
            if (anything_trainable) {
                auto params = model.parameters();
                if (cfg.clip_norm > 0.0) clip_global_norm(br.grads, params, stage.trainable, cfg.clip_norm);
                adam_step(result.adam, params, br.grads, stage.trainable);
            }
            trainer.trace.push_back({trainer.iteration, stage.step, br.loss, br.ce, br.reg1, br.reg2, br.reg3});
        } catch (const NumericError& e) {
            throw NumericError("stage " + std::to_string(stage.step) + " (" + stage.name + ") iteration " +
                               std::to_string(it + 1) + ": " + e.what());
        }
        ++result.report.iterations_run;
    }

    for (std::size_t g = 0; g < kGroupCount; ++g) result.report.digest_after[g] = model.digest(static_cast<ParamGroup>(g));
    return result;
}

TrainResult joint_train(std::span<const SkeletonSequence> data, const TrainConfig& cfg, const TrainPlan& plan,
                        std::uint64_t seed, const std::function<void(const StageCheckpoint&)>& on_stage) {
    if (data.empty()) throw ContractError("joint_train: empty training set");
    if (plan.stages.empty()) throw ContractError("joint_train: empty plan");
    for (const auto& s : data) s.validate(cfg.shape.classes);

    Trainer trainer(seed);
    ModelShape shape = cfg.shape;
    shape.main_layers = plan.stages.front().main_layers;
    TrainResult out;
    out.model = init_params(shape, trainer.rng, cfg.init_stddev);
    out.model.shape.main_layers = shape.main_layers;
    out.model.temporal.b.fill(cfg.temporal_gate_bias);

    for (const Stage& stage : plan.stages) {
        StageResult sr = run_stage(stage, out.model, data, cfg, trainer);
        StageCheckpoint cp{sr.report, out.model, std::move(sr.adam)};
        if (on_stage) on_stage(cp);
        out.checkpoints.push_back(std::move(cp));
    }
    out.trace = std::move(trainer.trace);
    return out;
}

EvalSummary evaluate(const STAModel& model, std::span<const SkeletonSequence> data, const LossConfig& loss) {
    if (data.empty()) throw ContractError("evaluate: empty evaluation set");
    EvalSummary s;
    std::size_t correct = 0;
    double total = 0.0;
    for (const auto& seq : data) {
        ad::Graph g;
        const BoundModel vars = bind(g, model, GroupMask::none());
        const ForwardGraph fwd = forward(g, model, vars, seq);
        const LossTerms t = total_loss(fwd, seq.label, model, vars, loss, /*include_l1=*/false);
        total += t.total.item();
        const std::size_t pred = argmax(fwd.p.value().values());
        s.predictions.push_back(pred);
        if (pred == seq.label) ++correct;
    }
    s.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    s.mean_loss = total / static_cast<double>(data.size());
    if (loss.l1_reg) s.mean_loss += loss.lambda3 * l1_penalty(model);
    return s;
}

}  // namespace sta
