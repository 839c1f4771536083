#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mcvae/data/sample.hpp"

namespace mcvae::data {

/// Cover region in image coordinates: everything inside the bed at or below
/// `top` is hidden in m2.
struct CoverRegion {
    double top = 0.0;
    double left = 0.0;
    double right = 0.0;
    double bottom = 0.0;
    bool contains(double x, double y) const { return y >= top && y <= bottom && x >= left && x <= right; }
};

inline constexpr double kBedLeft = 14.0;
inline constexpr double kBedRight = 49.0;
inline constexpr double kBedTop = 1.0;
inline constexpr double kBedBottom = 62.0;

/// Colours used by the renderer; exposed so tests can probe rendered pixels.
struct Palette {
    static constexpr std::array<double, 3> floor{0.32, 0.28, 0.24};
    static constexpr std::array<double, 3> bed{0.90, 0.90, 0.92};
    static constexpr std::array<double, 3> sheet{0.86, 0.80, 0.58};
    static constexpr std::array<double, 3> blanket{0.18, 0.34, 0.30};
};

CoverRegion cover_region(const std::array<Point, kJointCount> &joints, Cover cover);

/// Pose annotations for one subject, before rendering.
struct PoseSpec {
    std::array<Point, kJointCount> joints{};
};

std::vector<PoseSpec> subject_poses(std::uint64_t seed, int subject_id, int poses_per_subject);

/// Renders one pose of one subject under a cover condition.
Sample render_sample(std::uint64_t seed, int subject_id, int pose_index, const PoseSpec &pose, Cover cover);

/// Every pose emitted under all three covers with identical joints, ordered
/// pose-major then cover (uncovered, light, heavy).
std::vector<Sample> generate_subject(std::uint64_t seed, int subject_id, int poses_per_subject);

std::vector<Sample> generate_dataset(std::uint64_t seed, int subjects, int poses_per_subject);

/// Subject-wise 70/15/15 split.
struct DatasetSplit {
    std::uint64_t seed = 0;
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
    bool operator==(const DatasetSplit &) const = default;
};

DatasetSplit make_split(int subjects, std::uint64_t seed);

/// Samples whose subject is listed, in dataset order.
std::vector<const Sample *> select_subjects(const std::vector<Sample> &all, const std::vector<int> &subjects);

/// Pairs each sample's m1 with the uncovered m2 of the same pose. Returns
/// (sample index, index of its uncovered sibling).
std::vector<std::pair<std::size_t, std::size_t>> pair_for_vae(const std::vector<const Sample *> &samples);

/// Copy of `s` whose m2 is replaced by its uncovered sibling's m2.
Sample with_uncovered_m2(const Sample &s, const Sample &uncovered_sibling);

} // namespace mcvae::data
