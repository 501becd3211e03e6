#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sta/model.hpp"
#include "sta/trainer.hpp"

namespace sta {

inline constexpr int kCheckpointVersion = 1;

// A checkpoint is a JSON manifest (architecture, tensor names, shapes, byte
// offsets, blob digest) next to a blob of little-endian IEEE-754 doubles
// stored at "<manifest>.bin".

struct Checkpoint {
    STAModel model;
    std::optional<AdamState> adam;
    /// Free-form annotations (stage, variant, ...) as a JSON object text.
    std::string meta_json = "{}";
};

std::filesystem::path blob_path(const std::filesystem::path& manifest);

/// Writes manifest and blob atomically. `meta_json` must be a JSON object.
void checkpoint_save(const STAModel& model, const AdamState* adam, const std::filesystem::path& manifest,
                     const std::string& meta_json = "{}");

/// Throws VersionError for an unknown manifest version, CorruptionError for a
/// truncated blob or digest mismatch, LoadError for anything else.
Checkpoint checkpoint_load(const std::filesystem::path& manifest);

}  // namespace sta
