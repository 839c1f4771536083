#include "mcvae/pose/pose.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mcvae/model/backbone.hpp"

namespace mcvae::pose {

HeatmapHead::HeatmapHead(nn::ParamStore &store, const std::string &prefix, std::size_t in_channels, CounterRng &rng)
    : in_channels_(in_channels), conv_(store, prefix + ".conv", in_channels, kJointCount, 1, 1, 0, rng, true, 0.001)
{
}

Tensor HeatmapHead::forward(const Tensor &fused) const
{
    model::require_nchw(fused, in_channels_, kGrid, kGrid, "heatmap head");
    return conv_(fused);
}

Point cell_centre(std::size_t gx, std::size_t gy) { return {double(gx) * kCell + 0.5 * kCell, double(gy) * kCell + 0.5 * kCell}; }

std::vector<double> heatmap_targets(const Keypoints &joints, const JointFlags &visible, double sigma)
{
    if (!(sigma > 0.0)) throw std::invalid_argument("heatmap_targets: sigma must be positive");
    std::vector<double> out(kJointCount * kGrid * kGrid, 0.0);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t j = 0; j < kJointCount; ++j) {
        if (!visible[j]) continue;
        const auto cell = [](double v) {
            return std::clamp(std::round((v - 0.5 * kCell) / kCell), 0.0, double(kGrid - 1));
        };
        const double cx = cell(joints[j].x), cy = cell(joints[j].y);
        for (std::size_t gy = 0; gy < kGrid; ++gy)
            for (std::size_t gx = 0; gx < kGrid; ++gx) {
                const double dx = double(gx) - cx, dy = double(gy) - cy;
                out[(j * kGrid + gy) * kGrid + gx] = std::exp(-(dx * dx + dy * dy) * inv);
            }
    }
    return out;
}

Keypoints decode_keypoints(std::span<const double> maps)
{
    if (maps.size() != kJointCount * kGrid * kGrid)
        throw ad::ShapeError("decode_keypoints: expected 14x16x16 values, got " + std::to_string(maps.size()));
    Keypoints out{};
    for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto m = maps.subspan(j * kGrid * kGrid, kGrid * kGrid);
        const auto best = std::size_t(std::max_element(m.begin(), m.end()) - m.begin());
        out[j] = cell_centre(best % kGrid, best / kGrid);
    }
    return out;
}

Tensor pose_loss(const Tensor &pred, const Tensor &target, const Tensor &mask)
{
    double visible_maps = 0.0;
    for (double v : mask.data()) visible_maps += v;
    visible_maps /= double(kGrid * kGrid);
    const Tensor err = ad::mul(ad::squared_difference(pred, target), mask);
    return ad::scale(ad::sum(err), 1.0 / (std::max(visible_maps, 1.0) * double(kGrid * kGrid)));
}

JointFlags pckh(const Keypoints &pred, const Keypoints &truth, const JointFlags &visible, double head_size,
                double threshold)
{
    if (!(head_size > 0.0)) throw std::invalid_argument("pckh: head_size must be positive");
    JointFlags ok{};
    const double limit = threshold * head_size;
    for (std::size_t j = 0; j < kJointCount; ++j)
        ok[j] = visible[j] && std::hypot(pred[j].x - truth[j].x, pred[j].y - truth[j].y) <= limit;
    return ok;
}

std::string_view to_string(CoverFilter f)
{
    switch (f) {
    case CoverFilter::acc: return "ACC";
    case CoverFilter::oui: return "OUI";
    case CoverFilter::oci: return "OCI";
    }
    return "?";
}

CoverFilter parse_cover_filter(std::string_view s)
{
    std::string lower(s);
    for (auto &c : lower) c = char(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "acc") return CoverFilter::acc;
    if (lower == "oui") return CoverFilter::oui;
    if (lower == "oci") return CoverFilter::oci;
    throw std::invalid_argument("unknown cover filter '" + std::string(s) + "' (expected acc, oui or oci)");
}

bool matches(CoverFilter f, data::Cover c)
{
    switch (f) {
    case CoverFilter::acc: return true;
    case CoverFilter::oui: return c == data::Cover::uncovered;
    case CoverFilter::oci: return c != data::Cover::uncovered;
    }
    return false;
}

double JointCounts::total() const
{
    std::size_t c = 0, v = 0;
    for (std::size_t j = 0; j < kJointCount; ++j) {
        c += correct[j];
        v += visible[j];
    }
    return v == 0 ? 0.0 : double(c) / double(v);
}

double JointCounts::joint(std::size_t j) const
{
    return visible[j] == 0 ? 0.0 : double(correct[j]) / double(visible[j]);
}

PckhReport aggregate_report(std::span<const SampleResult> results, std::optional<double> utilization)
{
    if (results.empty()) throw std::invalid_argument("aggregate_report: no results");
    PckhReport r;
    JointCounts uncovered, covered;
    for (const auto &s : results) {
        auto &sub = s.cover == data::Cover::uncovered ? uncovered : covered;
        for (auto *c : {&r.counts, &sub}) {
            ++c->samples;
            for (std::size_t j = 0; j < kJointCount; ++j) {
                if (!s.visible[j]) continue;
                ++c->visible[j];
                if (s.correct[j]) ++c->correct[j];
            }
        }
    }
    for (std::size_t j = 0; j < kJointCount; ++j) r.per_joint[j] = r.counts.joint(j);
    r.total = r.counts.total();
    r.acc = r.total;
    if (uncovered.samples) r.oui = uncovered.total();
    if (covered.samples) r.oci = covered.total();
    r.utilization = utilization;
    return r;
}

} // namespace mcvae::pose
