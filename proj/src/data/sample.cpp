#include "mcvae/data/sample.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mcvae::data {

std::string_view to_string(Cover c)
{
    switch (c) {
    case Cover::uncovered: return "uncovered";
    case Cover::light: return "light";
    case Cover::heavy: return "heavy";
    }
    return "?";
}

Cover parse_cover(std::string_view s)
{
    for (auto c : kAllCovers)
        if (to_string(c) == s) return c;
    throw std::invalid_argument("unknown cover condition '" + std::string(s) + "'");
}

std::string Sample::pose_id() const
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%03d_p%03d", subject, pose);
    return buf;
}

double head_to_thorax(const std::array<Point, kJointCount> &joints)
{
    const auto &h = joints[index(Joint::Head)];
    const auto &t = joints[index(Joint::Thorax)];
    return std::hypot(h.x - t.x, h.y - t.y);
}

void validate(const Sample &s)
{
    const double hi = double(kImageSize - 1);
    for (std::size_t j = 0; j < kJointCount; ++j) {
        if (!s.visible[j]) continue;
        const auto &p = s.joints[j];
        if (!(p.x >= 0.0 && p.x <= hi && p.y >= 0.0 && p.y <= hi))
            throw std::invalid_argument(s.pose_id() + ": visible joint " + std::string(kJointNames[j]) +
                                        " outside [0, 63]");
    }
    if (!(s.head_size > 0.0)) throw std::invalid_argument(s.pose_id() + ": head_size must be positive");
    if (s.m1.channels != kM1Channels || s.m1.pixels.size() != kM1Channels * kImageSize * kImageSize)
        throw std::invalid_argument(s.pose_id() + ": m1 image must be 1x64x64");
    if (s.m2.channels != kM2Channels || s.m2.pixels.size() != kM2Channels * kImageSize * kImageSize)
        throw std::invalid_argument(s.pose_id() + ": m2 image must be 3x64x64");
}

} // namespace mcvae::data
