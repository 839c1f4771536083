#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mcvae/nn/params.hpp"

namespace mcvae::model {

using ad::Shape;
using ad::Tensor;

enum class Modality { m1, m2 };

struct StemConfig {
    std::size_t m1_channels = 1;
    std::size_t m2_channels = 3;
    std::size_t stem_channels = 16;
    // Tap feature [tap_channels, tap_size, tap_size]; identical for both
    // modalities so a reconstructed m2 tap can stand in for a real one.
    std::size_t tap_channels = 16;
    std::size_t tap_size = 16;
    std::size_t image_size = 64;

    std::size_t channels(Modality m) const { return m == Modality::m1 ? m1_channels : m2_channels; }
    Shape tap_shape() const { return {tap_channels, tap_size, tap_size}; }
};

/// Two parallel resolutions (high: tap resolution, low: half of it) with
/// cross-resolution exchange after every stage.
struct TrunkConfig {
    std::size_t high_channels = 16;
    std::size_t low_channels = 32;
    std::size_t blocks_per_stage = 2;
    std::size_t stages = 2;
    std::size_t out_channels = 32;
};

/// Two stride-2 4x4 convolutions: [N,C,64,64] -> tap [N,16,16,16]. The tap
/// is linear (no activation) so its values are unconstrained.
class Stem {
public:
    Stem() = default;
    Stem(nn::ParamStore &store, const std::string &prefix, std::size_t in_channels, const StemConfig &cfg,
         CounterRng &rng);

    Tensor forward(const Tensor &images) const;
    const std::string &prefix() const { return prefix_; }
    std::size_t in_channels() const { return in_channels_; }

private:
    std::string prefix_;
    std::size_t in_channels_ = 0;
    StemConfig cfg_;
    nn::Conv conv0_;
    nn::Conv conv1_;
};

/// Late-feature extractor: tap [N,16,16,16] -> [N,32,16,16].
class Trunk {
public:
    Trunk() = default;
    Trunk(nn::ParamStore &store, const std::string &prefix, const StemConfig &stem, const TrunkConfig &cfg,
          CounterRng &rng);

    Tensor forward(const Tensor &tap) const;
    const std::string &prefix() const { return prefix_; }
    Shape output_shape() const { return {cfg_.out_channels, tap_size_, tap_size_}; }

private:
    struct Stage {
        std::vector<nn::Conv> high_blocks;
        std::vector<nn::Conv> low_blocks;
        nn::Conv low_to_high;  // 1x1 then nearest upsample
        nn::Conv high_to_low;  // 4x4 stride 2
    };

    std::string prefix_;
    TrunkConfig cfg_;
    std::size_t tap_channels_ = 0;
    std::size_t tap_size_ = 0;
    nn::Conv transition_;
    std::vector<Stage> stages_;
    nn::Conv fuse_out_;
};

/// Throws ShapeError unless x is [N, c, h, w].
void require_nchw(const Tensor &x, std::size_t c, std::size_t h, std::size_t w, const char *where);

} // namespace mcvae::model
