#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcvae/autodiff/tensor.hpp"

namespace mcvae::ad {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments for one parameter tensor. `steps` counts updates actually
/// applied, so a parameter that sat frozen keeps its own bias correction.
struct AdamSlot {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t steps = 0;
};

struct AdamState {
    AdamConfig config;
    std::vector<AdamSlot> slots;
};

/// Bias-corrected Adam update of a single tensor.
void adam_update(Tensor &param, std::span<const double> grad, AdamSlot &slot, const AdamConfig &config,
                 double lr);

/// One bias-corrected Adam update of params[i] using grads[i] and slots[i].
/// Slots are sized on first use.
void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads, AdamState &state,
               double lr);

/// Convenience: each parameter's own accumulated grad (a missing grad counts
/// as zero).
void adam_step(std::span<Tensor> params, AdamState &state, double lr);

} // namespace mcvae::ad
