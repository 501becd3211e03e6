#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "sta/checkpoint.hpp"
#include "sta/errors.hpp"
#include "sta/io.hpp"

namespace sta::cli {

namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string run_meta(const RunConfig& cfg, const std::string& fold, int stage, const std::string& stage_name) {
    nlohmann::json j = {{"variant", variant_name(cfg.variant)}, {"seed", cfg.seed}, {"fold", fold}};
    if (stage >= 0) {
        j["stage"] = stage;
        j["stage_name"] = stage_name;
    }
    return j.dump();
}

std::size_t parse_fold(const RunConfig& cfg) {
    std::size_t k = 0;
    const auto [p, ec] = std::from_chars(cfg.fold.data(), cfg.fold.data() + cfg.fold.size(), k);
    if (ec != std::errc{} || p != cfg.fold.data() + cfg.fold.size()) throw ConfigError("bad fold '" + cfg.fold + "'");
    if (k >= cfg.folds) {
        throw ConfigError("fold " + cfg.fold + " out of range for " + std::to_string(cfg.folds) + " folds");
    }
    return k;
}

}  // namespace

int report_error(const std::exception& e, std::ostream& err) {
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DataError*>(&e) ||
        dynamic_cast<const LayoutError*>(&e) || dynamic_cast<const LoadError*>(&e)) {
        return kExitData;
    }
    return kExitFailure;
}

ModelShape data_shape(std::span<const SkeletonSequence> data) {
    if (data.empty()) throw ContractError("empty dataset");
    ModelShape s;
    s.joints = data.front().joints;
    s.persons = data.front().persons;
    s.classes = class_count(data);
    for (const auto& seq : data) {
        if (seq.joints != s.joints) throw DataError("sequences disagree on the joint count");
    }
    return s;
}

Dataset load_run_data(const RunConfig& cfg) {
    return load_dataset(cfg.data, cfg.format, cfg.effective_smooth_window(), cfg.center);
}

std::vector<std::size_t> train_indices(const RunConfig& cfg, std::span<const SkeletonSequence> data, std::size_t fold) {
    if (cfg.fold == "none") {
        std::vector<std::size_t> all(data.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    return split_folds(data, cfg.folds, cfg.seed).complement(fold);
}

std::vector<std::size_t> test_indices(const RunConfig& cfg, std::span<const SkeletonSequence> data, std::size_t fold) {
    if (cfg.fold == "none") return train_indices(cfg, data, fold);
    return split_folds(data, cfg.folds, cfg.seed).members(fold);
}

void write_loss_trace(const fs::path& path, std::span<const LossRecord> trace) {
    std::string text = "iteration,stage,loss,ce,reg1,reg2,reg3\n";
    for (const auto& r : trace) {
        text += std::to_string(r.iteration) + ',' + std::to_string(r.stage) + ',' + g17(r.loss) + ',' + g17(r.ce) +
                ',' + g17(r.reg1) + ',' + g17(r.reg2) + ',' + g17(r.reg3) + '\n';
    }
    write_file_atomic(path, text);
}

TrainResult train_into(const RunConfig& cfg, std::span<const SkeletonSequence> data, std::size_t classes,
                       const fs::path& out_dir, std::ostream& log) {
    fs::create_directories(out_dir);
    ModelShape shape = data_shape(data);
    shape.classes = std::max(shape.classes, classes);
    const TrainConfig tc = cfg.train_config(shape);
    const TrainPlan plan = cfg.plan();
    const bool staged = cfg.variant != Variant::kLstm;

    auto on_stage = [&](const StageCheckpoint& cp) {
        const Stage& st = cp.report.stage;
        log << "stage " << st.step << " (" << st.name << "): " << cp.report.iterations_run << " iterations\n";
        if (staged) {
            checkpoint_save(cp.model, &cp.adam, out_dir / ("stage" + std::to_string(st.step) + ".ckpt"),
                            run_meta(cfg, cfg.fold, st.step, st.name));
        }
    };
    TrainResult r = joint_train(data, tc, plan, cfg.seed, on_stage);
    const AdamState* adam = r.checkpoints.empty() ? nullptr : &r.checkpoints.back().adam;
    checkpoint_save(r.model, adam, out_dir / "final.ckpt", run_meta(cfg, cfg.fold, -1, ""));
    write_loss_trace(out_dir / "loss_trace.csv", r.trace);
    write_file_atomic(out_dir / "config.txt", cfg.to_text());
    if (!r.trace.empty()) log << "final training loss " << g17(r.trace.back().loss) << '\n';
    return r;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const Dataset data = load_run_data(cfg);
    const std::size_t classes = class_count(data);
    const fs::path root = cfg.out;
    if (cfg.fold == "all") {
        for (std::size_t k = 0; k < cfg.folds; ++k) {
            RunConfig fc = cfg;
            fc.fold = std::to_string(k);
            out << "fold " << k << '\n';
            const Dataset train = select(data, train_indices(fc, data, k));
            train_into(fc, train, classes, root / ("fold" + std::to_string(k)), out);
        }
        return kExitOk;
    }
    const std::size_t fold = cfg.fold == "none" ? 0 : parse_fold(cfg);
    const Dataset train = select(data, train_indices(cfg, data, fold));
    train_into(cfg, train, classes, root, out);
    return kExitOk;
}

double AccuracyReport::class_accuracy(std::size_t c) const {
    const std::size_t n = class_total(c);
    return n ? static_cast<double>(confusion[c][c]) / static_cast<double>(n) : 0.0;
}

std::size_t AccuracyReport::class_total(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t v : confusion[c]) n += v;
    return n;
}

AccuracyReport accuracy_report(const STAModel& model, std::span<const SkeletonSequence> data, const LossConfig& loss) {
    const EvalSummary s = evaluate(model, data, loss);
    AccuracyReport r;
    r.classes = model.classes();
    r.confusion.assign(r.classes, std::vector<std::size_t>(r.classes, 0));
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].label >= r.classes) {
            throw LoadError("label " + std::to_string(data[i].label) + " outside the model's " +
                            std::to_string(r.classes) + " classes");
        }
        ++r.confusion[data[i].label][s.predictions[i]];
    }
    r.accuracy = s.accuracy;
    r.mean_loss = s.mean_loss;
    return r;
}

void print_report(const AccuracyReport& r, std::ostream& out) {
    char buf[64];
    for (std::size_t c = 0; c < r.classes; ++c) {
        std::snprintf(buf, sizeof buf, "class %zu: %6.2f%% (%zu/%zu)\n", c, 100.0 * r.class_accuracy(c),
                      r.confusion[c][c], r.class_total(c));
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "overall: %6.2f%%  mean loss %.6g\n", 100.0 * r.accuracy, r.mean_loss);
    out << buf << "confusion (rows: true, columns: predicted)\n";
    for (const auto& row : r.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << row[j];
        out << '\n';
    }
}

int cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& out) {
    const Dataset data = load_run_data(cfg);
    auto eval_one = [&](const fs::path& ckpt, std::size_t fold) {
        const Checkpoint cp = checkpoint_load(ckpt);
        const Dataset test = select(data, test_indices(cfg, data, fold));
        if (test.empty()) throw ContractError("empty evaluation set");
        if (test.front().joints != cp.model.joints()) {
            throw LoadError("checkpoint expects " + std::to_string(cp.model.joints()) + " joints, data has " +
                            std::to_string(test.front().joints));
        }
        const AccuracyReport r = accuracy_report(cp.model, test, cfg.loss);
        print_report(r, out);
        return r.accuracy;
    };
    if (cfg.fold == "all") {
        double sum = 0.0;
        for (std::size_t k = 0; k < cfg.folds; ++k) {
            out << "fold " << k << '\n';
            sum += eval_one(checkpoint / ("fold" + std::to_string(k)) / "final.ckpt", k);
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu-fold mean accuracy: %6.2f%%\n", cfg.folds,
                      100.0 * sum / static_cast<double>(cfg.folds));
        out << buf;
        return kExitOk;
    }
    eval_one(checkpoint, cfg.fold == "none" ? 0 : parse_fold(cfg));
    return kExitOk;
}

void export_attention(const STAModel& model, const SkeletonSequence& seq, const fs::path& out_dir) {
    if (seq.joints != model.joints()) {
        throw LoadError("checkpoint expects " + std::to_string(model.joints()) + " joints, sequence has " +
                        std::to_string(seq.joints));
    }
    const Prediction pred = forward(model, seq);
    const AttentionTrace& tr = pred.trace;
    std::string alpha = "frame,joint,alpha\n";
    std::string beta = "frame,beta,delta_beta\n";
    double prev = 0.0;
    for (std::size_t t = 0; t < tr.frames; ++t) {
        for (std::size_t k = 0; k < tr.joints; ++k) {
            alpha += std::to_string(t + 1) + ',' + std::to_string(k) + ',' + g17(tr.alphas[t * tr.joints + k]) + '\n';
        }
        const double b = tr.betas[t];
        beta += std::to_string(t + 1) + ',' + g17(b) + ',' + g17(b - prev) + '\n';
        prev = b;
    }
    fs::create_directories(out_dir);
    write_file_atomic(out_dir / "alpha.csv", alpha);
    write_file_atomic(out_dir / "beta.csv", beta);
}

int cmd_export_attention(const RunConfig& cfg, const fs::path& checkpoint, std::size_t index, std::ostream& out) {
    const Checkpoint cp = checkpoint_load(checkpoint);
    const Dataset data = load_run_data(cfg);
    if (index >= data.size()) {
        throw ContractError("sequence index " + std::to_string(index) + " out of range (" +
                            std::to_string(data.size()) + " sequences)");
    }
    export_attention(cp.model, data[index], cfg.out);
    out << "wrote " << (fs::path(cfg.out) / "alpha.csv").string() << " and " << (fs::path(cfg.out) / "beta.csv").string()
        << '\n';
    return kExitOk;
}

int cmd_gen_synth(const SynthArgs& args, std::ostream& out) {
    Dataset data = gen_synthetic(args.synth);
    if (args.format == "sbu") {
        static constexpr int kPairs[][2] = {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {4, 5}, {5, 6}};
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i].persons = kSbuPersons;
            const auto& p = kPairs[(i / args.synth.n_classes) % std::size(kPairs)];
            data[i].subjects = std::make_pair(p[0], p[1]);
        }
        save_sbu(args.out, data);
    } else if (args.format == "generic") {
        if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
        save_generic(args.out, data);
    } else {
        throw ConfigError("format: expected generic or sbu, got '" + args.format + "'");
    }
    out << "wrote " << data.size() << " sequences to " << args.out.string() << '\n';
    return kExitOk;
}

GradCheckResult grad_check_tiny(std::uint64_t seed, double eps) {
    ModelShape shape;
    shape.joints = 4;
    shape.persons = 1;
    shape.classes = 2;
    shape.main_hidden = 4;
    shape.main_layers = 2;
    shape.spatial_hidden = 4;
    shape.score_hidden = 4;
    shape.temporal_hidden = 4;
    STAModel model = init_params(shape, seed, 0.3);
    // Keep the frame-gate pre-activations clear of the relu kink.
    model.temporal.b.fill(0.5);

    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::normal_distribution<double> n01(0.0, 1.0);
    SkeletonSequence seq;
    seq.joints = shape.joints;
    seq.label = 1;
    seq.valid_len = 5;
    seq.coords.resize(seq.valid_len * seq.frame_dim());
    for (double& v : seq.coords) v = n01(rng);

    LossConfig loss;
    loss.lambda1 = 0.1;
    loss.lambda2 = 0.1;
    loss.lambda3 = 0.01;

    const SkeletonSequence* batch[] = {&seq};
    BatchOptions bo;
    bo.training = false;
    const BatchResult br = batch_gradient_serial(model, batch, loss, GroupMask::all(), bo);
    auto refs = model.parameters();
    std::vector<Tensor*> tensors;
    for (auto& r : refs) tensors.push_back(r.tensor);
    const std::span<const SkeletonSequence> one(&seq, 1);
    return compare_finite_differences(tensors, br.grads, [&] { return evaluate(model, one, loss).mean_loss; }, eps);
}

int cmd_grad_check(std::uint64_t seed, double tolerance, std::ostream& out) {
    const GradCheckResult r = grad_check_tiny(seed);
    char buf[128];
    std::snprintf(buf, sizeof buf, "checked %zu coordinates, max relative error %.3e (tolerance %.1e)\n", r.checked,
                  r.max_rel_error, tolerance);
    out << buf;
    return r.max_rel_error < tolerance ? kExitOk : kExitFailure;
}

}  // namespace sta::cli
