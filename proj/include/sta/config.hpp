#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "sta/dataset.hpp"
#include "sta/objective.hpp"
#include "sta/trainer.hpp"

namespace sta {

/// Everything a CLI run needs. Built from a "key = value" file plus
/// command-line overrides; unknown keys are rejected.
struct RunConfig {
    Variant variant = Variant::kSta;
    std::string profile = "sbu";
    LossConfig loss = LossConfig::sbu();
    std::size_t hidden = 100;
    std::size_t attn_hidden = 100;
    std::size_t score_hidden = 0;  // 0: same as attn_hidden
    std::size_t main_layers = 3;
    double dropout = 0.5;
    std::size_t batch_size = 8;
    std::size_t n1 = 1000;
    std::size_t n2 = 500;
    double clip_norm = 5.0;
    double lr = 0.001;
    double init_stddev = 0.1;
    double temporal_gate_bias = 1.0;
    bool parallel = true;
    std::uint64_t seed = 1;
    std::string data;
    std::string format = "generic";  // generic | sbu
    std::string fold = "none";       // none | all | 0..folds-1
    std::size_t folds = 5;
    std::size_t smooth_window = 0;  // 0: 5 for sbu, 1 (off) for generic
    bool center = false;
    std::string out = "run";

    /// Applies one setting. Throws ConfigError for an unknown key or bad value.
    void set(const std::string& key, const std::string& value);
    /// Profile defaults (lambdas, batch size) then the remaining keys, in file order.
    void apply(const std::vector<std::pair<std::string, std::string>>& settings);

    /// Variant implies the bypass flags; returns the plan for this run.
    TrainPlan plan() const;
    TrainConfig train_config(const ModelShape& data_shape) const;
    std::size_t effective_smooth_window() const;

    /// Canonical "key = value" listing of every setting.
    std::string to_text() const;
};

/// Parses "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Loads a dataset in the configured format and applies preprocessing.
Dataset load_dataset(const std::string& path, const std::string& format, std::size_t smooth_window, bool center);

}  // namespace sta
