#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcvae/autodiff/adam.hpp"
#include "mcvae/autodiff/ops.hpp"
#include "mcvae/rng.hpp"

namespace mcvae::nn {

using ad::Shape;
using ad::Tensor;

/// Named parameter tensors of one model, keyed by stable dotted paths
/// ("stem1.conv0.weight"). Iteration order is the lexicographic key order.
class ParamStore {
public:
    /// Kaiming fan-in normal: std = sqrt(2 / fan_in).
    Tensor kaiming(const std::string &name, Shape shape, std::size_t fan_in, CounterRng &rng);
    /// Normal with the given std.
    Tensor normal(const std::string &name, Shape shape, double stddev, CounterRng &rng);
    Tensor zeros(const std::string &name, Shape shape);

    bool contains(const std::string &name) const { return params_.count(name) != 0; }
    const Tensor &at(const std::string &name) const;
    Tensor &at(const std::string &name);
    const std::map<std::string, Tensor> &all() const { return params_; }
    std::size_t scalar_count() const;
    std::size_t scalar_count(const std::string &prefix) const;

    /// Parameters whose name starts with `prefix` are skipped by the optimizer.
    void freeze(const std::string &prefix) { frozen_.insert(prefix); }
    void unfreeze(const std::string &prefix) { frozen_.erase(prefix); }
    bool is_frozen(const std::string &name) const;
    const std::set<std::string> &frozen_prefixes() const { return frozen_; }

    void zero_grad();

    /// Copy values from another store with identical names and shapes.
    void copy_values_from(const ParamStore &other);

private:
    Tensor add(const std::string &name, Tensor t);

    std::map<std::string, Tensor> params_;
    std::set<std::string> frozen_;
};

/// Adam over a ParamStore, keeping one moment slot per parameter name.
class Optimizer {
public:
    explicit Optimizer(ad::AdamConfig config = {}) : config_(config) {}

    /// Updates every non-frozen parameter from its accumulated grad.
    void step(ParamStore &store, double lr);

    const ad::AdamConfig &config() const { return config_; }
    std::map<std::string, ad::AdamSlot> &slots() { return slots_; }
    const std::map<std::string, ad::AdamSlot> &slots() const { return slots_; }

private:
    ad::AdamConfig config_;
    std::map<std::string, ad::AdamSlot> slots_;
};

struct Conv {
    Tensor weight;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    Conv() = default;
    Conv(ParamStore &store, const std::string &name, std::size_t in, std::size_t out, std::size_t k,
         std::size_t stride, std::size_t padding, CounterRng &rng, bool with_bias = true, double stddev = -1.0);

    Tensor operator()(const Tensor &x) const { return ad::conv2d(x, weight, bias, stride, padding); }
};

struct Dense {
    Tensor weight;
    Tensor bias;

    Dense() = default;
    Dense(ParamStore &store, const std::string &name, std::size_t in, std::size_t out, CounterRng &rng,
          double stddev = -1.0);

    Tensor operator()(const Tensor &x) const { return ad::dense(x, weight, bias); }
};

} // namespace mcvae::nn
