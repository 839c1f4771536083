#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mcvae/autodiff/ops.hpp"
#include "mcvae/nn/params.hpp"
#include "mcvae/rng.hpp"

namespace mcvae::testing {

using ad::Shape;
using ad::Tensor;

inline Tensor random_tensor(const Shape &shape, CounterRng &rng, bool requires_grad = false, double lo = -1.0,
                            double hi = 1.0)
{
    std::vector<double> v(ad::numel(shape));
    for (auto &x : v) x = rng.uniform(lo, hi);
    return Tensor::from(shape, std::move(v), requires_grad);
}

/// sum(x * r) for a fixed random r: a scalar whose gradient is r.
inline Tensor weighted_sum(const Tensor &x, std::uint64_t seed)
{
    CounterRng rng(seed, 77);
    return ad::sum(ad::mul(x, random_tensor(x.shape(), rng)));
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // perturbation crossed a relu kink
};

/// Central differences with step h on `coords` random coordinates spread over
/// `leaves`, against the gradient from one backward pass. Relative error is
/// |a - n| / max(|a|, |n|, 1e-6, 1e-7 * |loss|). Rounding in the loss puts
/// noise of about 1e-16 * |loss| / h on the numeric slope, so the floor
/// grows with the loss.
inline GradCheck check_gradient(const std::function<Tensor()> &loss_fn, std::vector<Tensor> leaves,
                                std::size_t coords, std::uint64_t seed, double h = 1e-4)
{
    for (auto &t : leaves) t.zero_grad();
    std::uint64_t base_hash = 0;
    double floor = 1e-6;
    {
        ad::ReluKinkProbe probe;
        const Tensor loss = loss_fn();
        base_hash = probe.take();
        floor = std::max(floor, 1e-7 * std::abs(loss.item()));
        ad::backward(loss);
    }
    std::vector<std::vector<double>> grads;
    for (auto &t : leaves) {
        if (t.has_grad()) grads.emplace_back(t.grad().begin(), t.grad().end());
        else grads.emplace_back(t.numel(), 0.0);
    }

    GradCheck out;
    CounterRng rng(seed, 4242);
    std::size_t attempts = 0;
    while (out.checked < coords && attempts < coords * 20) {
        ++attempts;
        const std::size_t li = rng.below(leaves.size());
        const std::size_t i = rng.below(leaves[li].numel());
        auto data = leaves[li].mutable_data();
        const double orig = data[i];
        ad::ReluKinkProbe probe;
        data[i] = orig + h;
        const double lp = loss_fn().item();
        const std::uint64_t hp = probe.take();
        data[i] = orig - h;
        const double lm = loss_fn().item();
        const std::uint64_t hm = probe.take();
        data[i] = orig;
        if (hp != base_hash || hm != base_hash) {
            ++out.skipped;
            continue;
        }
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = grads[li][i];
        const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
        out.max_rel = std::max(out.max_rel, rel);
        ++out.checked;
    }
    return out;
}

inline std::vector<Tensor> all_params(nn::ParamStore &store)
{
    std::vector<Tensor> v;
    for (auto &[name, t] : store.all()) v.push_back(t);
    return v;
}

} // namespace mcvae::testing
