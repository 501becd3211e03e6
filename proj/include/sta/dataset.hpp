#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sta {

/// T frames of K joints x 3 coordinates, joint-major within a frame.
/// Frames past valid_len are padding and never read by the model.
struct SkeletonSequence {
    std::size_t joints = 0;   // K, all persons together
    std::size_t persons = 1;  // P
    std::size_t label = 0;
    std::size_t valid_len = 0;
    std::vector<double> coords;  // T * K * 3
    std::optional<std::pair<int, int>> subjects;

    std::size_t frame_dim() const { return joints * 3; }
    std::size_t length() const { return frame_dim() ? coords.size() / frame_dim() : 0; }
    std::span<const double> frame(std::size_t t) const { return {coords.data() + t * frame_dim(), frame_dim()}; }
    std::span<double> frame(std::size_t t) { return {coords.data() + t * frame_dim(), frame_dim()}; }
    double& at(std::size_t t, std::size_t joint, std::size_t axis) { return coords[(t * joints + joint) * 3 + axis]; }
    double at(std::size_t t, std::size_t joint, std::size_t axis) const {
        return coords[(t * joints + joint) * 3 + axis];
    }

    /// Throws DataError on non-finite coordinates, bad lengths, or a label >= class_count.
    void validate(std::optional<std::size_t> class_count = std::nullopt) const;
};

using Dataset = std::vector<SkeletonSequence>;

std::size_t class_count(std::span<const SkeletonSequence> seqs);

// ---- generic text format --------------------------------------------------
//
// Per sequence: a header line "T K P label [subject_a subject_b]" followed by
// T lines of 3K floats (joint0.x joint0.y joint0.z joint1.x ...). A file holds
// one or more sequences back to back; a directory is read file by file in
// name order.

Dataset load_generic(const std::filesystem::path& path);
void save_generic(const std::filesystem::path& path, std::span<const SkeletonSequence> seqs);

// ---- SBU Kinect interaction ----------------------------------------------

inline constexpr std::size_t kSbuJointsPerPerson = 15;
inline constexpr std::size_t kSbuPersons = 2;
inline constexpr std::size_t kSbuClasses = 8;

/// Reads <class>/<pair>/<run>/skeleton.txt (the original release's
/// <pair>/<class>/<run> nesting is recognized too). Rows are a frame index
/// followed by 90 comma-separated coordinates.
Dataset load_sbu(const std::filesystem::path& root);
/// Writes the class-major layout. Sequences must have 30 joints and 2 persons;
/// a sequence without subject ids is filed under pair s01s02.
void save_sbu(const std::filesystem::path& root, std::span<const SkeletonSequence> seqs);

// ---- preprocessing ---------------------------------------------------------

/// Centered moving average per coordinate over the valid frames, replicating
/// the edge frames. `window` must be odd.
SkeletonSequence smooth(const SkeletonSequence& seq, std::size_t window);

/// Subtracts the first frame's body center (mean of all joints) from every joint.
SkeletonSequence center_normalize(const SkeletonSequence& seq);

// ---- synthetic actions -----------------------------------------------------

struct SyntheticConfig {
    std::size_t n_sequences = 20;
    std::size_t n_classes = 2;
    std::size_t joints = 8;
    std::size_t min_len = 10;
    std::size_t max_len = 20;
    /// Joints moving along the class trajectory, per class.
    std::vector<std::vector<std::size_t>> active_joints;
    double noise_sigma = 0.1;
    double amplitude = 1.0;
    std::uint64_t seed = 1;
};

/// One designated joint per class: class c drives joint c.
SyntheticConfig one_joint_per_class(std::size_t n_classes, std::size_t joints);

/// Class-specific sinusoids on each class's active joints, Gaussian noise on
/// every other joint. Labels cycle through the classes, so they are balanced.
Dataset gen_synthetic(const SyntheticConfig& cfg);

// ---- cross validation ------------------------------------------------------

struct FoldSplit {
    std::size_t folds = 0;
    std::vector<std::size_t> fold_of;  // indexed like the dataset

    std::vector<std::size_t> members(std::size_t fold) const;
    std::vector<std::size_t> complement(std::size_t fold) const;
};

/// k-way split. When every sequence carries subject ids, whole subject pairs
/// are assigned to folds; otherwise the split is stratified by label.
FoldSplit split_folds(std::span<const SkeletonSequence> seqs, std::size_t k, std::uint64_t seed);

Dataset select(std::span<const SkeletonSequence> seqs, std::span<const std::size_t> indices);

}  // namespace sta
