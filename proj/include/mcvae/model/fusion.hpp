#pragma once

#include <span>
#include <string>

#include "mcvae/nn/params.hpp"

namespace mcvae::model {

using ad::Tensor;

/// Importance-weighted blend of two late feature streams,
///   fused = (1 - W) * f_m1 + W * f_m2,
/// with W in [0,1] produced per element by a bottlenecked 1x1-conv attention
/// over (f_m1 + f_m2).
class AttentionFusion {
public:
    AttentionFusion() = default;
    AttentionFusion(nn::ParamStore &store, const std::string &prefix, std::size_t channels, std::size_t ratio,
                    CounterRng &rng);

    Tensor weights(const Tensor &f_m1, const Tensor &f_m2) const;

    struct Result {
        Tensor fused;
        Tensor weights;
    };
    Result fuse(const Tensor &f_m1, const Tensor &f_m2) const;

private:
    nn::Conv squeeze_;
    nn::Conv expand_;
};

/// The blend itself for a given W; exact at W = 0 and W = 1.
Tensor fuse_with_weights(const Tensor &f_m1, const Tensor &f_m2, const Tensor &w);

/// Running pooled mean of W entries across a dataset.
class UtilizationMeter {
public:
    void add(const Tensor &w);
    bool empty() const { return count_ == 0; }
    double value() const;

private:
    double sum_ = 0.0;
    std::size_t count_ = 0;
};

/// Grand mean of all W entries, the share attributed to the m2 stream.
double utilization(std::span<const Tensor> weights);

} // namespace mcvae::model
