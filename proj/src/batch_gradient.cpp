#include <omp.h>

#include <cmath>
#include <cstdint>
#include <exception>

#include "sta/errors.hpp"
#include "sta/trainer.hpp"

namespace sta {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct SequenceResult {
    std::vector<Tensor> grads;  // trainable parameters only, in parameter order
    double ce = 0.0, reg1 = 0.0, reg2 = 0.0, loss = 0.0;
};

SequenceResult sequence_gradient(const STAModel& model, const SkeletonSequence& seq, std::size_t slot,
                                 const LossConfig& loss, const GroupMask& trainable, const BatchOptions& opts) {
    std::mt19937_64 rng(splitmix64(opts.dropout_seed ^ splitmix64(slot)));
    ad::Graph g;
    const BoundModel vars = bind(g, model, trainable);
    ForwardOptions fo;
    fo.training = opts.training;
    fo.dropout = opts.dropout;
    fo.rng = &rng;
    const ForwardGraph fwd = forward(g, model, vars, seq, fo);
    const LossTerms terms = total_loss(fwd, seq.label, model, vars, loss, /*include_l1=*/false);
    g.backward(terms.total);

    SequenceResult r;
    r.loss = terms.total.item();
    r.ce = terms.ce.item();
    r.reg1 = terms.reg1.item();
    r.reg2 = terms.reg2.item();
    const auto refs = model.parameters();
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (trainable.contains(refs[i].group)) r.grads.push_back(vars.leaves[i].grad());
    }
    return r;
}

// Deterministic reduction in batch order, then the once-per-batch L1 term.
BatchResult reduce(const STAModel& model, std::span<const SequenceResult> parts, const LossConfig& loss,
                   const GroupMask& trainable) {
    BatchResult out;
    const auto refs = model.parameters();
    for (const auto& p : refs) out.grads.emplace_back(p.tensor->shape(), 0.0);
    const double inv = 1.0 / static_cast<double>(parts.size());
    for (const auto& part : parts) {
        std::size_t slot = 0;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            if (!trainable.contains(refs[i].group)) continue;
            const Tensor& g = part.grads[slot++];
            Tensor& acc = out.grads[i];
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
        }
        out.loss += part.loss;
        out.ce += part.ce;
        out.reg1 += part.reg1;
        out.reg2 += part.reg2;
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (!trainable.contains(refs[i].group)) continue;
        for (double& g : out.grads[i].values()) g *= inv;
    }
    out.loss *= inv;
    out.ce *= inv;
    out.reg1 *= inv;
    out.reg2 *= inv;

    out.reg3 = l1_penalty(model);
    if (loss.l1_reg) {
        out.loss += loss.lambda3 * out.reg3;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            if (!refs[i].is_weight || !trainable.contains(refs[i].group) || !model.group_active(refs[i].group)) continue;
            const Tensor& w = *refs[i].tensor;
            Tensor& g = out.grads[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                const double sign = w[j] > 0.0 ? 1.0 : (w[j] < 0.0 ? -1.0 : 0.0);
                g[j] += loss.lambda3 * sign;
            }
        }
    }
    return out;
}

void check_batch(std::span<const SkeletonSequence* const> batch) {
    if (batch.empty()) throw ContractError("empty minibatch");
}

}  // namespace

BatchResult batch_gradient_serial(const STAModel& model, std::span<const SkeletonSequence* const> batch,
                                  const LossConfig& loss, const GroupMask& trainable, const BatchOptions& opts) {
    check_batch(batch);
    std::vector<SequenceResult> parts;
    parts.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        parts.push_back(sequence_gradient(model, *batch[i], i, loss, trainable, opts));
    }
    return reduce(model, parts, loss, trainable);
}

BatchResult batch_gradient_parallel(const STAModel& model, std::span<const SkeletonSequence* const> batch,
                                    const LossConfig& loss, const GroupMask& trainable, const BatchOptions& opts) {
    check_batch(batch);
    model.validate();
    std::vector<SequenceResult> parts(batch.size());
    std::exception_ptr error;
    const auto n = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            parts[i] = sequence_gradient(model, *batch[i], static_cast<std::size_t>(i), loss, trainable, opts);
        } catch (...) {
#pragma omp critical(sta_batch_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return reduce(model, parts, loss, trainable);
}

}  // namespace sta
