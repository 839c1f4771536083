#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mcvae::data {

inline constexpr std::size_t kJointCount = 14;
inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kM1Channels = 1;
inline constexpr std::size_t kM2Channels = 3;

/// Joint order of the evaluation tables.
enum class Joint : std::size_t {
    RAnkle, RKnee, RHip, LHip, LKnee, LAnkle,
    RWrist, RElbow, RShoulder, LShoulder, LElbow, LWrist,
    Thorax, Head,
};

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "R_Ankle", "R_Knee", "R_Hip", "L_Hip", "L_Knee", "L_Ankle", "R_Wrist",
    "R_Elbow", "R_Shoulder", "L_Shoulder", "L_Elbow", "L_Wrist", "Thorax", "Head",
};

constexpr std::size_t index(Joint j) { return static_cast<std::size_t>(j); }

enum class Cover { uncovered, light, heavy };

inline constexpr std::array<Cover, 3> kAllCovers = {Cover::uncovered, Cover::light, Cover::heavy};

std::string_view to_string(Cover c);
Cover parse_cover(std::string_view s);

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point &) const = default;
};

/// Channel-major image, values in [0, 1].
struct Image {
    std::size_t channels = 0;
    std::size_t height = kImageSize;
    std::size_t width = kImageSize;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : channels(c), height(h), width(w), pixels(c * h * w, fill)
    {
    }

    double &at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }
    bool operator==(const Image &) const = default;
};

/// A paired two-modality record. m1 is the thermal-like stream, m2 the
/// colour stream.
struct Sample {
    int subject = 0;
    int pose = 0;
    Cover cover = Cover::uncovered;
    Image m1;
    Image m2;
    std::array<Point, kJointCount> joints{};
    std::array<bool, kJointCount> visible{};
    double head_size = 0.0;

    /// "s003_p012": identifies the pose independent of cover.
    std::string pose_id() const;
    bool operator==(const Sample &) const = default;
};

/// Throws std::invalid_argument naming the violated invariant.
void validate(const Sample &s);

double head_to_thorax(const std::array<Point, kJointCount> &joints);

} // namespace mcvae::data
