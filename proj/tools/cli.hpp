#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sta/config.hpp"
#include "sta/grad_check.hpp"
#include "sta/model.hpp"

namespace sta::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Maps an exception thrown by a command to an exit code and prints it.
int report_error(const std::exception& e, std::ostream& err);

/// Shape of the model trained on `data`: K, P from the first sequence,
/// C from the largest label.
ModelShape data_shape(std::span<const SkeletonSequence> data);

/// Loads the configured dataset with its preprocessing.
Dataset load_run_data(const RunConfig& cfg);

/// Training indices for the configured fold ("none" trains on everything).
std::vector<std::size_t> train_indices(const RunConfig& cfg, std::span<const SkeletonSequence> data, std::size_t fold);
std::vector<std::size_t> test_indices(const RunConfig& cfg, std::span<const SkeletonSequence> data, std::size_t fold);

void write_loss_trace(const std::filesystem::path& path, std::span<const LossRecord> trace);

/// Trains one model into `out_dir`: stage checkpoints (attention variants only),
/// final.ckpt, loss_trace.csv and config.txt.
TrainResult train_into(const RunConfig& cfg, std::span<const SkeletonSequence> data, std::size_t classes,
                       const std::filesystem::path& out_dir, std::ostream& log);

int cmd_train(const RunConfig& cfg, std::ostream& out);

struct AccuracyReport {
    std::size_t classes = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    double accuracy = 0.0;
    double mean_loss = 0.0;

    double class_accuracy(std::size_t c) const;
    std::size_t class_total(std::size_t c) const;
};

AccuracyReport accuracy_report(const STAModel& model, std::span<const SkeletonSequence> data, const LossConfig& loss);
void print_report(const AccuracyReport& r, std::ostream& out);

/// With fold "all", `checkpoint` is the training output directory holding fold<k>/final.ckpt.
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& out);

/// Attention of one sequence: alpha.csv (frame, joint, alpha), beta.csv
/// (frame, beta, delta_beta). Frames are 1-based.
void export_attention(const STAModel& model, const SkeletonSequence& seq, const std::filesystem::path& out_dir);
int cmd_export_attention(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::size_t index,
                         std::ostream& out);

struct SynthArgs {
    SyntheticConfig synth;
    std::string format = "generic";
    std::filesystem::path out;
};
/// The SBU format takes 30 joints; persons become 2 and subject pairs cycle over 7 pairs.
int cmd_gen_synth(const SynthArgs& args, std::ostream& out);

/// Finite-difference check of the full loss (all four terms) on a tiny model.
GradCheckResult grad_check_tiny(std::uint64_t seed, double eps = 1e-6);
int cmd_grad_check(std::uint64_t seed, double tolerance, std::ostream& out);

}  // namespace sta::cli
