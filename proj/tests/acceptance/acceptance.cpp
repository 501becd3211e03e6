// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any gated
// criterion fails. Tolerances and budgets are fixed below.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <functional>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "cli.hpp"
#include "reference.hpp"
#include "sta/checkpoint.hpp"
#include "sta/io.hpp"
#include "sta/objective.hpp"
#include "sta/trainer.hpp"

namespace fs = std::filesystem;
using namespace sta;

namespace {

constexpr double kGradTolerance = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kNormTolerance = 1e-12;
constexpr double kReg1Bound = 2.25;
constexpr double kReg1Slack = 1e-9;
constexpr double kOverfitLoss = 0.05;
constexpr double kOverfitSeconds = 600.0;
constexpr double kSbuAccuracy = 0.80;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void report(const char* name, const Outcome& o, bool gated = true) {
    std::printf("%s  %-28s %s\n", o.pass ? "PASS" : (gated ? "FAIL" : "INFO"), name, o.detail.c_str());
    std::fflush(stdout);
    if (gated && !o.pass) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sta_acceptance_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---- shared synthetic tasks --------------------------------------------------

// 20 sequences, 2 classes, K=8, T in [10, 20].
Dataset overfit_data() {
    SyntheticConfig sc = one_joint_per_class(2, 8);
    sc.n_sequences = 20;
    sc.min_len = 10;
    sc.max_len = 20;
    sc.seed = 11;
    return gen_synthetic(sc);
}

TrainConfig small_config(const Dataset& data, std::size_t hidden) {
    TrainConfig tc;
    tc.shape.joints = data.front().joints;
    tc.shape.persons = 1;
    tc.shape.classes = class_count(data);
    tc.shape.main_hidden = hidden;
    tc.shape.main_layers = 3;
    tc.shape.spatial_hidden = hidden;
    tc.shape.score_hidden = hidden;
    tc.shape.temporal_hidden = hidden;
    tc.loss = LossConfig::sbu();
    tc.dropout = 0.0;
    tc.batch_size = 8;
    return tc;
}

// Default synthetic task (2 classes, K=8, T in [10, 20], noise 0.1) with one
// designated signal joint per class, split into train and held-out test.
struct SelectivityTask {
    Dataset train, test;
};

SelectivityTask selectivity_task(std::uint64_t seed) {
    SyntheticConfig sc = one_joint_per_class(2, 8);
    sc.n_sequences = 128;
    sc.seed = 1000 + seed;
    SelectivityTask t;
    t.train = gen_synthetic(sc);
    sc.n_sequences = 64;
    sc.seed = 2000 + seed;
    t.test = gen_synthetic(sc);
    return t;
}

constexpr std::size_t kSelHidden = 32;
constexpr std::size_t kSelN1 = 300;
constexpr std::size_t kSelN2 = 150;
constexpr int kSelSeeds = 5;

double accuracy(const STAModel& m, const Dataset& data) {
    std::size_t ok = 0;
    for (const auto& s : data) ok += predict(m, s) == s.label;
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

// ---- criteria ---------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const GradCheckResult r = cli::grad_check_tiny(seed);
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
    }
    const double secs = seconds_since(t0);
    return {worst < kGradTolerance && secs < kGradSeconds,
            fmt("max rel error %.3e over %.0f coords (tol 1e-5), %.2f s (limit 60 s)", worst,
                static_cast<double>(checked), secs)};
}

Outcome normalization_invariants() {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> joints(2, 10), frames(1, 12), classes(2, 6), hidden(2, 8);
    double worst_alpha = 0.0, worst_p = 0.0, min_beta = 0.0;
    for (int n = 0; n < 1000; ++n) {
        ModelShape s = test::tiny_shape(joints(rng), classes(rng), hidden(rng), 1 + n % 3);
        const STAModel m = init_params(s, rng, 0.5);
        const SkeletonSequence seq = test::random_sequence(rng, s.joints, frames(rng), 0);
        const Prediction p = forward(m, seq);
        for (std::size_t t = 0; t < p.trace.frames; ++t) {
            double sum = 0.0;
            for (std::size_t k = 0; k < p.trace.joints; ++k) sum += p.trace.alphas[t * p.trace.joints + k];
            worst_alpha = std::max(worst_alpha, std::fabs(sum - 1.0));
            min_beta = std::min(min_beta, p.trace.betas[t]);
        }
        double ps = 0.0;
        for (double v : p.p) ps += v;
        worst_p = std::max(worst_p, std::fabs(ps - 1.0));
    }
    return {worst_alpha <= kNormTolerance && worst_p <= kNormTolerance && min_beta >= 0.0,
            fmt("max |sum alpha - 1| %.2e, max |sum p - 1| %.2e, min beta %.3g (1000 forwards)", worst_alpha, worst_p,
                min_beta)};
}

Outcome bypass_equivalence() {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> frames(1, 15);
    std::size_t mismatches = 0;
    for (int n = 0; n < 100; ++n) {
        STAModel m = init_params(test::tiny_shape(5, 3, 6, 3), rng, 0.4);
        m.spatial_bypass = true;
        m.temporal_bypass = true;
        const SkeletonSequence seq = test::random_sequence(rng, 5, frames(rng), 0);
        const Prediction p = forward(m, seq);
        const std::vector<double> ref = test::reference_plain_lstm(m, seq);
        if (p.p != ref) ++mismatches;
    }
    return {mismatches == 0, fmt("%.0f of 100 sequences differ from the plain reference", static_cast<double>(mismatches))};
}

Outcome spatial_regularizer_bound() {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::size_t> frames(1, 30);
    std::normal_distribution<double> logit(0.0, 3.0);
    constexpr std::size_t k = 4;
    double lowest = 1e300;
    for (int n = 0; n < 10000; ++n) {
        const std::size_t t = frames(rng);
        std::vector<double> a(t * k);
        for (std::size_t r = 0; r < t; ++r) {
            double total = 0.0;
            for (std::size_t j = 0; j < k; ++j) total += a[r * k + j] = std::exp(logit(rng));
            for (std::size_t j = 0; j < k; ++j) a[r * k + j] /= total;
        }
        lowest = std::min(lowest, spatial_reg(a, t, k));
    }
    std::vector<double> uniform(3 * k, 1.0 / k);
    const double at_uniform = spatial_reg(uniform, 3, k);
    return {lowest >= kReg1Bound - kReg1Slack && std::fabs(at_uniform - kReg1Bound) < 1e-12,
            fmt("min reg1 %.12f over 10000 matrices, uniform gives %.12f", lowest, at_uniform)};
}

struct OverfitRun {
    TrainResult result;
    Dataset data;
    TrainConfig cfg;
    double seconds = 0.0;
};

OverfitRun overfit_run() {
    OverfitRun r;
    r.data = overfit_data();
    r.cfg = small_config(r.data, 16);
    const auto t0 = std::chrono::steady_clock::now();
    r.result = joint_train(r.data, r.cfg, TrainPlan::joint(400, 200, 3), 5);
    r.seconds = seconds_since(t0);
    return r;
}

Outcome overfit(const OverfitRun& r) {
    const EvalSummary s = evaluate(r.result.model, r.data, r.cfg.loss);
    return {s.accuracy == 1.0 && s.mean_loss < kOverfitLoss && r.seconds < kOverfitSeconds,
            fmt("train accuracy %.1f%%, final mean loss %.4f (limit 0.05), %.1f s on 1 thread (limit 600 s)",
                100.0 * s.accuracy, s.mean_loss, r.seconds)};
}

Outcome staging(const OverfitRun& r) {
    const auto& cps = r.result.checkpoints;
    bool frozen = true, grown = true;
    std::size_t grow_stages = 0;
    for (const auto& cp : cps) {
        frozen = frozen && cp.report.frozen_groups_unchanged();
        if (cp.report.stage.main_init == MainInit::kGrow) {
            ++grow_stages;
            grown = grown && cp.report.layer0_before_grow && cp.report.layer0_after_grow &&
                    *cp.report.layer0_before_grow == *cp.report.layer0_after_grow &&
                    cp.model.main.size() == 3;
        }
    }
    return {cps.size() == 8 && frozen && grown && grow_stages == 2,
            std::to_string(cps.size()) + " stage checkpoints, frozen groups unchanged: " + (frozen ? "yes" : "no") +
                ", layer 0 bitwise kept across " + std::to_string(grow_stages) + " growths: " + (grown ? "yes" : "no")};
}

// Mean over test sequences of the time-averaged alpha on the sequence's own signal joint.
double signal_attention(const STAModel& m, const Dataset& test, const SyntheticConfig& sc) {
    double total = 0.0;
    for (const auto& seq : test) {
        const Prediction p = forward(m, seq);
        const auto& joints = sc.active_joints[seq.label];
        double s = 0.0;
        for (std::size_t t = 0; t < p.trace.frames; ++t)
            for (std::size_t j : joints) s += p.trace.alphas[t * p.trace.joints + j];
        total += s / static_cast<double>(p.trace.frames * joints.size());
    }
    return total / static_cast<double>(test.size());
}

struct AblationRuns {
    double accuracy[4][kSelSeeds] = {};  // lstm, sa, ta, sta
    double sta_signal_alpha[kSelSeeds] = {};
    double seconds = 0.0;
};

constexpr Variant kVariants[] = {Variant::kLstm, Variant::kSa, Variant::kTa, Variant::kSta};

AblationRuns ablation_runs() {
    AblationRuns r;
    const auto t0 = std::chrono::steady_clock::now();
    const SyntheticConfig sc = one_joint_per_class(2, 8);
    for (int s = 0; s < kSelSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s + 1);
        const SelectivityTask task = selectivity_task(seed);
        TrainConfig tc = small_config(task.train, kSelHidden);
        tc.dropout = 0.5;
        for (int v = 0; v < 4; ++v) {
            const STAModel m =
                joint_train(task.train, tc, TrainPlan::for_variant(kVariants[v], kSelN1, kSelN2, 3), seed).model;
            r.accuracy[v][s] = accuracy(m, task.test);
            if (kVariants[v] == Variant::kSta) r.sta_signal_alpha[s] = signal_attention(m, task.test, sc);
        }
    }
    r.seconds = seconds_since(t0);
    return r;
}

Outcome selectivity(const AblationRuns& r) {
    double mean = 0.0;
    std::string per_seed;
    for (double a : r.sta_signal_alpha) {
        mean += a / kSelSeeds;
        per_seed += fmt(" %.3f", a);
    }
    const double bound = 2.0 / 8.0;
    return {mean >= bound, fmt("mean alpha on signal joint %.4f (uniform 0.125, bound %.3f); per seed:", mean, bound) +
                               per_seed};
}

Outcome ablation(const AblationRuns& r) {
    double mean[4] = {};
    for (int v = 0; v < 4; ++v)
        for (double a : r.accuracy[v]) mean[v] += a / kSelSeeds;
    const double lstm = mean[0], sa = mean[1], ta = mean[2], sta = mean[3];
    const bool ok = sta >= sa && sa >= lstm && sta >= ta && ta >= lstm;
    return {ok, fmt("mean test accuracy over 5 seeds: LSTM %.1f%%, SA %.1f%%, TA %.1f%%, STA %.1f%%", 100 * lstm,
                    100 * sa, 100 * ta, 100 * sta) +
                    fmt(" (%.0f s)", r.seconds)};
}

std::string dir_bytes(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + '\0' + read_file(f) + '\0';
    return all;
}

Outcome determinism() {
    const Dataset data = overfit_data();
    RunConfig rc;
    rc.hidden = 8;
    rc.attn_hidden = 8;
    rc.dropout = 0.5;
    rc.n1 = 20;
    rc.n2 = 10;
    rc.seed = 99;
    std::ostringstream log;
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    cli::train_into(rc, data, 2, a, log);
    cli::train_into(rc, data, 2, b, log);
    const bool same_files = read_file(a / "loss_trace.csv") == read_file(b / "loss_trace.csv") &&
                            dir_bytes(a) == dir_bytes(b);

    const Checkpoint cp = checkpoint_load(a / "final.ckpt");
    const TrainResult direct = joint_train(data, rc.train_config(cli::data_shape(data)), rc.plan(), rc.seed);
    bool round_trip = cp.model.identical(direct.model);
    for (const auto& seq : data) {
        const Prediction x = forward(direct.model, seq), y = forward(cp.model, seq);
        round_trip = round_trip && x.o == y.o && x.p == y.p && x.trace.alphas == y.trace.alphas &&
                     x.trace.betas == y.trace.betas;
    }
    fs::remove_all(a.parent_path());
    return {same_files && round_trip,
            std::string("rerun outputs byte-identical: ") + (same_files ? "yes" : "no") +
                ", checkpoint round-trip forward bit-identical: " + (round_trip ? "yes" : "no")};
}

Outcome sbu_informational(const char* root) {
    RunConfig rc;
    rc.format = "sbu";
    rc.data = root;
    rc.fold = "all";
    const Dataset data = cli::load_run_data(rc);
    double sum = 0.0;
    for (std::size_t k = 0; k < rc.folds; ++k) {
        const Dataset train = select(data, cli::train_indices(rc, data, k));
        const Dataset test = select(data, cli::test_indices(rc, data, k));
        TrainConfig tc = rc.train_config(cli::data_shape(data));
        const TrainResult r = joint_train(train, tc, rc.plan(), rc.seed);
        sum += accuracy(r.model, test);
    }
    const double mean = sum / static_cast<double>(rc.folds);
    return {mean >= kSbuAccuracy, fmt("5-fold mean accuracy %.2f%% (target 80%%)", 100.0 * mean)};
}

}  // namespace

int main() {
    omp_set_num_threads(1);
    report("gradient-fidelity", gradient_fidelity());
    report("normalization-invariants", normalization_invariants());
    report("bypass-equivalence", bypass_equivalence());
    report("spatial-reg-bound", spatial_regularizer_bound());
    const OverfitRun run = overfit_run();
    report("overfit", overfit(run));
    report("stage-checkpoints", staging(run));
    const AblationRuns runs = ablation_runs();
    report("attention-selectivity", selectivity(runs));
    report("ablation-ordering", ablation(runs));
    report("determinism-persistence", determinism());
    if (const char* root = std::getenv("STA_SBU_ROOT"); root && fs::is_directory(root)) {
        report("sbu-5fold", sbu_informational(root), /*gated=*/false);
    } else {
        std::printf("SKIP  %-28s %s\n", "sbu-5fold", "set STA_SBU_ROOT to the dataset root to run (informational)");
    }
    std::printf("%d gated criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
