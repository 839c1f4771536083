#pragma once

#include <cstdint>

#include "mcvae/data/sample.hpp"

namespace mcvae::data {

/// Maximum magnitudes; each call draws uniformly within them. Values beyond
/// the supported ranges are clipped.
struct AugmentConfig {
    double rotation_deg = 30.0;   // |angle| <= 30
    double shift_frac = 0.1;      // |shift| <= 10% of the image side
    double scale_delta = 0.2;     // scale in [1 - d, 1 + d], d <= 0.2
    double jitter = 0.2;          // per-channel m2 gain in [1 - j, 1 + j], j <= 0.2
    double occlusion_area = 0.25; // patch covers at most this fraction, <= 0.25

    static AugmentConfig none() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
    AugmentConfig clipped() const;
    bool operator==(const AugmentConfig &) const = default;
};

/// p' = c + scale * R(angle) * (p - c) + shift, c = image centre (31.5, 31.5).
struct Affine {
    double angle_rad = 0.0;
    double scale = 1.0;
    double shift_x = 0.0;
    double shift_y = 0.0;

    bool is_identity() const { return angle_rad == 0.0 && scale == 1.0 && shift_x == 0.0 && shift_y == 0.0; }
    Point apply(Point p) const;
    Point invert(Point p) const;
};

/// Bilinear inverse warp; samples falling outside the source read as 0.
Image warp_image(const Image &src, const Affine &t);

/// Shared geometric transform on both images and the joints; jitter on m2
/// only; one noise-filled occlusion patch at the same place in both images.
/// Joints leaving the frame lose visibility.
Sample augment(const Sample &sample, std::uint64_t seed, const AugmentConfig &config);

} // namespace mcvae::data
