#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cli.hpp"
#include "sta/errors.hpp"

namespace {

// Flags shared by the commands that read a run configuration.
struct RunFlags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::string> data, format, variant, fold, seed, out;
    bool no_spatial_reg = false;
    bool no_temporal_reg = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config, "key = value configuration file");
        cmd->add_option("--set", sets, "extra key=value override (repeatable)");
        cmd->add_option("--data", data, "dataset file or directory");
        cmd->add_option("--format", format, "dataset format: generic or sbu");
        cmd->add_option("--variant", variant, "lstm, sa, ta or sta");
        cmd->add_option("--fold", fold, "none, all or a fold index");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_flag("--no-spatial-reg", no_spatial_reg, "drop the spatial attention regularizer");
        cmd->add_flag("--no-temporal-reg", no_temporal_reg, "drop the temporal attention regularizer");
    }

    sta::RunConfig resolve() const {
        sta::RunConfig cfg = config.empty() ? sta::RunConfig{} : sta::load_config(config);
        std::vector<std::pair<std::string, std::string>> kv;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw sta::ConfigError("--set expects key=value, got '" + s + "'");
            kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        cfg.apply(kv);
        if (data) cfg.set("data", *data);
        if (format) cfg.set("format", *format);
        if (variant) cfg.set("variant", *variant);
        if (fold) cfg.set("fold", *fold);
        if (seed) cfg.set("seed", *seed);
        if (out) cfg.set("out", *out);
        if (no_spatial_reg) cfg.set("spatial_reg", "false");
        if (no_temporal_reg) cfg.set("temporal_reg", "false");
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal attention LSTM for skeleton action recognition"};
    app.require_subcommand(1);

    RunFlags train_flags;
    auto* train = app.add_subcommand("train", "train a model");
    train_flags.add_to(train);

    RunFlags eval_flags;
    std::string eval_ckpt;
    auto* eval = app.add_subcommand("eval", "accuracy of a checkpoint");
    eval_flags.add_to(eval);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint manifest (a run directory with --fold all)")->required();

    RunFlags export_flags;
    std::string export_ckpt;
    std::size_t export_index = 0;
    auto* exp = app.add_subcommand("export-attention", "write alpha.csv and beta.csv for one sequence");
    export_flags.add_to(exp);
    exp->add_option("--checkpoint", export_ckpt, "checkpoint manifest")->required();
    exp->add_option("--index", export_index, "sequence index within --data");

    sta::cli::SynthArgs synth;
    synth.synth.n_sequences = 40;
    std::string synth_out;
    std::size_t per_class_joints = 1;
    auto* gen = app.add_subcommand("gen-synth", "write a synthetic dataset");
    gen->add_option("--out", synth_out, "output file (generic) or directory (sbu)")->required();
    gen->add_option("--format", synth.format, "generic or sbu");
    gen->add_option("--sequences", synth.synth.n_sequences, "number of sequences");
    gen->add_option("--classes", synth.synth.n_classes, "number of classes");
    gen->add_option("--joints", synth.synth.joints, "joints per frame");
    gen->add_option("--active-joints", per_class_joints, "signal joints per class");
    gen->add_option("--min-len", synth.synth.min_len, "shortest sequence");
    gen->add_option("--max-len", synth.synth.max_len, "longest sequence");
    gen->add_option("--noise", synth.synth.noise_sigma, "noise standard deviation");
    gen->add_option("--seed", synth.synth.seed, "random seed");

    std::uint64_t gc_seed = 1;
    double gc_tol = 1e-5;
    auto* gc = app.add_subcommand("grad-check", "finite-difference check on a tiny model");
    gc->add_option("--seed", gc_seed, "random seed");
    gc->add_option("--tolerance", gc_tol, "maximum relative error");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return sta::cli::cmd_train(train_flags.resolve(), std::cout);
        if (*eval) return sta::cli::cmd_eval(eval_flags.resolve(), eval_ckpt, std::cout);
        if (*exp) return sta::cli::cmd_export_attention(export_flags.resolve(), export_ckpt, export_index, std::cout);
        if (*gen) {
            synth.out = synth_out;
            if (synth.format == "sbu") synth.synth.joints = sta::kSbuPersons * sta::kSbuJointsPerPerson;
            synth.synth.active_joints.assign(synth.synth.n_classes, {});
            for (std::size_t c = 0; c < synth.synth.n_classes; ++c) {
                for (std::size_t a = 0; a < per_class_joints; ++a) {
                    synth.synth.active_joints[c].push_back((c * per_class_joints + a) % synth.synth.joints);
                }
            }
            return sta::cli::cmd_gen_synth(synth, std::cout);
        }
        if (*gc) return sta::cli::cmd_grad_check(gc_seed, gc_tol, std::cout);
    } catch (const std::exception& e) {
        return sta::cli::report_error(e, std::cerr);
    }
    return sta::cli::kExitFailure;
}
