#include "mcvae/model/fusion.hpp"

#include <algorithm>
#include <stdexcept>

namespace mcvae::model {

AttentionFusion::AttentionFusion(nn::ParamStore &store, const std::string &prefix, std::size_t channels,
                                 std::size_t ratio, CounterRng &rng)
    : squeeze_(store, prefix + ".squeeze", channels, std::max<std::size_t>(1, channels / ratio), 1, 1, 0, rng),
      expand_(store, prefix + ".expand", std::max<std::size_t>(1, channels / ratio), channels, 1, 1, 0, rng)
{
}

Tensor AttentionFusion::weights(const Tensor &f_m1, const Tensor &f_m2) const
{
    if (f_m1.shape() != f_m2.shape())
        throw ad::ShapeError("fuse: shape mismatch " + ad::to_string(f_m1.shape()) + " vs " +
                             ad::to_string(f_m2.shape()));
    return ad::sigmoid(expand_(ad::relu(squeeze_(ad::add(f_m1, f_m2)))));
}

AttentionFusion::Result AttentionFusion::fuse(const Tensor &f_m1, const Tensor &f_m2) const
{
    Tensor w = weights(f_m1, f_m2);
    return {fuse_with_weights(f_m1, f_m2, w), w};
}

Tensor fuse_with_weights(const Tensor &f_m1, const Tensor &f_m2, const Tensor &w)
{
    return ad::convex_blend(f_m1, f_m2, w);
}

void UtilizationMeter::add(const Tensor &w)
{
    for (double v : w.data()) sum_ += v;
    count_ += w.numel();
}

double UtilizationMeter::value() const
{
    if (count_ == 0) throw std::invalid_argument("utilization of an empty set of fusion weights");
    return sum_ / double(count_);
}

double utilization(std::span<const Tensor> weights)
{
    UtilizationMeter m;
    for (const auto &w : weights) m.add(w);
    return m.value();
}

} // namespace mcvae::model
