#include "mcvae/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mcvae/rng.hpp"

namespace mcvae::data {

namespace {
constexpr double kCentre = 0.5 * double(kImageSize - 1);
}

AugmentConfig AugmentConfig::clipped() const
{
    auto clip = [](double v, double hi) { return std::clamp(std::abs(v), 0.0, hi); };
    return {clip(rotation_deg, 30.0), clip(shift_frac, 0.1), clip(scale_delta, 0.2), clip(jitter, 0.2),
            clip(occlusion_area, 0.25)};
}

Point Affine::apply(Point p) const
{
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    const double dx = p.x - kCentre, dy = p.y - kCentre;
    return {kCentre + scale * (c * dx - s * dy) + shift_x, kCentre + scale * (s * dx + c * dy) + shift_y};
}

Point Affine::invert(Point p) const
{
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    const double dx = (p.x - kCentre - shift_x) / scale, dy = (p.y - kCentre - shift_y) / scale;
    return {kCentre + c * dx + s * dy, kCentre - s * dx + c * dy};
}

Image warp_image(const Image &src, const Affine &t)
{
    if (t.is_identity()) return src;
    Image out(src.channels, src.height, src.width, 0.0);
    for (std::size_t y = 0; y < src.height; ++y)
        for (std::size_t x = 0; x < src.width; ++x) {
            const Point p = t.invert({double(x), double(y)});
            const double fx = std::floor(p.x), fy = std::floor(p.y);
            const double ax = p.x - fx, ay = p.y - fy;
            const long x0 = long(fx), y0 = long(fy);
            for (std::size_t c = 0; c < src.channels; ++c) {
                auto tap = [&](long yy, long xx) {
                    if (yy < 0 || xx < 0 || yy >= long(src.height) || xx >= long(src.width)) return 0.0;
                    return src.at(c, std::size_t(yy), std::size_t(xx));
                };
                out.at(c, y, x) = (1 - ay) * ((1 - ax) * tap(y0, x0) + ax * tap(y0, x0 + 1)) +
                                  ay * ((1 - ax) * tap(y0 + 1, x0) + ax * tap(y0 + 1, x0 + 1));
            }
        }
    return out;
}

Sample augment(const Sample &sample, std::uint64_t seed, const AugmentConfig &config)
{
    const auto cfg = config.clipped();
    CounterRng rng(seed, 0xa6);
    Affine t;
    t.angle_rad = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * std::numbers::pi / 180.0;
    t.scale = 1.0 + rng.uniform(-cfg.scale_delta, cfg.scale_delta);
    t.shift_x = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * double(kImageSize);
    t.shift_y = rng.uniform(-cfg.shift_frac, cfg.shift_frac) * double(kImageSize);

    Sample out = sample;
    out.m1 = warp_image(sample.m1, t);
    out.m2 = warp_image(sample.m2, t);
    if (!t.is_identity()) {
        const double hi = double(kImageSize - 1);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            out.joints[j] = t.apply(sample.joints[j]);
            const auto &p = out.joints[j];
            if (!(p.x >= 0.0 && p.x <= hi && p.y >= 0.0 && p.y <= hi)) out.visible[j] = false;
        }
        out.head_size = sample.head_size * t.scale;
    }

    for (std::size_t c = 0; c < out.m2.channels; ++c) {
        const double gain = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter);
        if (gain == 1.0) continue;
        for (std::size_t i = 0; i < kImageSize * kImageSize; ++i) {
            auto &v = out.m2.pixels[c * kImageSize * kImageSize + i];
            v = std::clamp(v * gain, 0.0, 1.0);
        }
    }

    const double area = rng.uniform(0.0, cfg.occlusion_area) * double(kImageSize * kImageSize);
    if (area >= 1.0) {
        const double aspect = std::exp(rng.uniform(-0.7, 0.7));
        const auto w = std::clamp<std::size_t>(std::size_t(std::sqrt(area * aspect)), 1, kImageSize);
        const auto h = std::clamp<std::size_t>(std::size_t(area / double(w)), 1, kImageSize);
        const std::size_t x0 = rng.below(kImageSize - w + 1), y0 = rng.below(kImageSize - h + 1);
        for (auto *img : {&out.m1, &out.m2})
            for (std::size_t c = 0; c < img->channels; ++c)
                for (std::size_t y = y0; y < y0 + h; ++y)
                    for (std::size_t x = x0; x < x0 + w; ++x) img->at(c, y, x) = rng.uniform();
    }
    return out;
}

} // namespace mcvae::data
