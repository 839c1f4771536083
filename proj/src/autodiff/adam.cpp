#include "mcvae/autodiff/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mcvae::ad {

void adam_update(Tensor &param, std::span<const double> grad, AdamSlot &slot, const AdamConfig &cfg, double lr)
{
    auto p = param.mutable_data();
    if (!grad.empty() && grad.size() != p.size())
        throw std::invalid_argument("adam_update: grad has " + std::to_string(grad.size()) + " entries for " +
                                    std::to_string(p.size()));
    if (slot.m.empty()) {
        slot.m.assign(p.size(), 0.0);
        slot.v.assign(p.size(), 0.0);
    }
    if (slot.m.size() != p.size() || slot.v.size() != p.size())
        throw std::invalid_argument("adam_update: optimizer slot does not match parameter size");
    ++slot.steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(slot.steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(slot.steps));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = grad.empty() ? 0.0 : grad[i];
        slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
        slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
        p[i] -= lr * (slot.m[i] / c1) / (std::sqrt(slot.v[i] / c2) + cfg.eps);
    }
}

void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads, AdamState &state,
               double lr)
{
    if (grads.size() != params.size())
        throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " params but " +
                                    std::to_string(grads.size()) + " grads");
    if (state.slots.empty()) state.slots.resize(params.size());
    if (state.slots.size() != params.size())
        throw std::invalid_argument("adam_step: optimizer state holds " + std::to_string(state.slots.size()) +
                                    " slots for " + std::to_string(params.size()) + " params");

    for (std::size_t k = 0; k < params.size(); ++k) adam_update(params[k], grads[k], state.slots[k], state.config, lr);
}

void adam_step(std::span<Tensor> params, AdamState &state, double lr)
{
    std::vector<std::span<const double>> grads;
    grads.reserve(params.size());
    for (auto &p : params) grads.push_back(p.grad());
    adam_step(params, grads, state, lr);
}

} // namespace mcvae::ad
