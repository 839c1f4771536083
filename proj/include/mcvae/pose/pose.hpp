#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcvae/data/sample.hpp"
#include "mcvae/nn/params.hpp"

namespace mcvae::pose {

using ad::Tensor;
using data::kJointCount;
using data::Point;

inline constexpr std::size_t kGrid = 16;
inline constexpr double kCell = double(data::kImageSize) / double(kGrid);

using Keypoints = std::array<Point, kJointCount>;
using JointFlags = std::array<bool, kJointCount>;

/// 1x1 conv from fused late features [N,32,16,16] to heatmaps [N,14,16,16].
class HeatmapHead {
public:
    HeatmapHead() = default;
    HeatmapHead(nn::ParamStore &store, const std::string &prefix, std::size_t in_channels, CounterRng &rng);

    Tensor forward(const Tensor &fused) const;

private:
    std::size_t in_channels_ = 0;
    nn::Conv conv_;
};

/// Gaussian bump per visible joint centred on its (rounded) grid cell, peak
/// exactly 1; invisible joints get an all-zero map. Row-major [14,16,16].
std::vector<double> heatmap_targets(const Keypoints &joints, const JointFlags &visible, double sigma);

/// Image position of a heatmap cell: cell * 4 + 2.
Point cell_centre(std::size_t gx, std::size_t gy);

/// Per-joint argmax (first maximum in row-major order) mapped back to image
/// coordinates. `maps` holds 14 * 16 * 16 values.
Keypoints decode_keypoints(std::span<const double> maps);

/// Heatmap MSE over visible joints: sum over visible maps of squared error,
/// divided by (visible joints * 256). `mask` marks visible joint maps with 1.
Tensor pose_loss(const Tensor &pred, const Tensor &target, const Tensor &mask);

/// Joint j is correct iff ||pred_j - truth_j|| <= threshold * head_size.
/// Entries for invisible joints are false and must be skipped via `visible`.
JointFlags pckh(const Keypoints &pred, const Keypoints &truth, const JointFlags &visible, double head_size,
                double threshold = 0.5);

struct SampleResult {
    JointFlags correct{};
    JointFlags visible{};
    data::Cover cover = data::Cover::uncovered;
};

enum class CoverFilter { acc, oui, oci };
std::string_view to_string(CoverFilter f);
CoverFilter parse_cover_filter(std::string_view s);
bool matches(CoverFilter f, data::Cover c);

struct JointCounts {
    std::array<std::size_t, kJointCount> correct{};
    std::array<std::size_t, kJointCount> visible{};
    std::size_t samples = 0;

    double total() const;
    double joint(std::size_t j) const;
};

struct PckhReport {
    std::array<double, kJointCount> per_joint{};
    double total = 0.0;
    JointCounts counts;
    // Totals restricted to all / uncovered / covered samples; empty when a
    // subset has no samples.
    std::optional<double> acc;
    std::optional<double> oui;
    std::optional<double> oci;
    std::optional<double> utilization;
};

PckhReport aggregate_report(std::span<const SampleResult> results, std::optional<double> utilization = {});

} // namespace mcvae::pose
