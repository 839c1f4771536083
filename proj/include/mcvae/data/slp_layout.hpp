#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "mcvae/data/sample.hpp"

// On-disk dataset layout, modelled on a multi-sensor lying-pose corpus:
//
//   root/subject_007/pose_012_heavy_lwir.f64
//   root/subject_007/pose_012_heavy_rgb.f64
//   root/subject_007/annot.txt
//
// Image files: four little-endian u32 extents [1, C, H, W] followed by the
// row-major little-endian f64 values. annot.txt holds one line per
// (pose, cover): pose id, cover, 14 x "x y v", head_size. Other sensor files
// in a subject directory are ignored.
namespace mcvae::data {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_image(const std::filesystem::path &file, const Image &img);
Image read_image(const std::filesystem::path &file);

/// Writes every sample; subject directories are created as needed.
void export_slp_layout(const std::filesystem::path &root, const std::vector<Sample> &samples);

/// Reads a tree written by export_slp_layout (or laid out the same way).
std::vector<Sample> load_slp_layout(const std::filesystem::path &root);

} // namespace mcvae::data
