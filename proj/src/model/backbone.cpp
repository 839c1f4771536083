#include "mcvae/model/backbone.hpp"

namespace mcvae::model {

void require_nchw(const Tensor &x, std::size_t c, std::size_t h, std::size_t w, const char *where)
{
    const auto &s = x.shape();
    if (s.size() != 4 || s[1] != c || s[2] != h || s[3] != w)
        throw ad::ShapeError(std::string(where) + ": expected [N," + std::to_string(c) + "," + std::to_string(h) +
                             "," + std::to_string(w) + "], got " + ad::to_string(s));
}

Stem::Stem(nn::ParamStore &store, const std::string &prefix, std::size_t in_channels, const StemConfig &cfg,
           CounterRng &rng)
    : prefix_(prefix), in_channels_(in_channels), cfg_(cfg),
      conv0_(store, prefix + ".conv0", in_channels, cfg.stem_channels, 4, 2, 1, rng),
      conv1_(store, prefix + ".conv1", cfg.stem_channels, cfg.tap_channels, 4, 2, 1, rng)
{
    if (cfg.image_size != 4 * cfg.tap_size)
        throw std::invalid_argument("stem: image size must be four times the tap size");
}

Tensor Stem::forward(const Tensor &images) const
{
    require_nchw(images, in_channels_, cfg_.image_size, cfg_.image_size, "stem");
    return conv1_(ad::relu(conv0_(images)));
}

Trunk::Trunk(nn::ParamStore &store, const std::string &prefix, const StemConfig &stem, const TrunkConfig &cfg,
             CounterRng &rng)
    : prefix_(prefix), cfg_(cfg), tap_channels_(stem.tap_channels), tap_size_(stem.tap_size)
{
    const auto hc = cfg.high_channels, lc = cfg.low_channels;
    if (hc != stem.tap_channels) throw std::invalid_argument("trunk: high branch width must equal the tap width");
    transition_ = nn::Conv(store, prefix + ".transition", hc, lc, 4, 2, 1, rng);
    for (std::size_t s = 0; s < cfg.stages; ++s) {
        const auto p = prefix + ".stage" + std::to_string(s);
        Stage st;
        for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
            st.high_blocks.emplace_back(store, p + ".high" + std::to_string(b), hc, hc, 3, 1, 1, rng);
            st.low_blocks.emplace_back(store, p + ".low" + std::to_string(b), lc, lc, 3, 1, 1, rng);
        }
        st.low_to_high = nn::Conv(store, p + ".low_to_high", lc, hc, 1, 1, 0, rng);
        st.high_to_low = nn::Conv(store, p + ".high_to_low", hc, lc, 4, 2, 1, rng);
        stages_.push_back(std::move(st));
    }
    fuse_out_ = nn::Conv(store, prefix + ".out", hc + lc, cfg.out_channels, 1, 1, 0, rng);
}

Tensor Trunk::forward(const Tensor &tap) const
{
    require_nchw(tap, tap_channels_, tap_size_, tap_size_, "trunk");
    Tensor high = tap;
    Tensor low = ad::relu(transition_(high));
    for (const auto &st : stages_) {
        for (std::size_t b = 0; b < st.high_blocks.size(); ++b) {
            high = ad::relu(ad::add(high, st.high_blocks[b](high)));
            low = ad::relu(ad::add(low, st.low_blocks[b](low)));
        }
        Tensor up = ad::upsample_nearest(st.low_to_high(low), 2);
        Tensor down = st.high_to_low(high);
        high = ad::relu(ad::add(high, up));
        low = ad::relu(ad::add(low, down));
    }
    return ad::relu(fuse_out_(ad::concat({high, ad::upsample_nearest(low, 2)}, 1)));
}

} // namespace mcvae::model
