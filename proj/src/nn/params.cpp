#include "mcvae/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace mcvae::nn {

Tensor ParamStore::add(const std::string &name, Tensor t)
{
    if (!params_.emplace(name, t).second) throw std::logic_error("duplicate parameter name: " + name);
    return t;
}

Tensor ParamStore::kaiming(const std::string &name, Shape shape, std::size_t fan_in, CounterRng &rng)
{
    return normal(name, std::move(shape), std::sqrt(2.0 / double(fan_in)), rng);
}

Tensor ParamStore::normal(const std::string &name, Shape shape, double stddev, CounterRng &rng)
{
    std::vector<double> v(ad::numel(shape));
    for (auto &x : v) x = stddev * rng.normal();
    return add(name, Tensor::from(std::move(shape), std::move(v), true));
}

Tensor ParamStore::zeros(const std::string &name, Shape shape)
{
    return add(name, Tensor::zeros(std::move(shape), true));
}

const Tensor &ParamStore::at(const std::string &name) const
{
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

Tensor &ParamStore::at(const std::string &name)
{
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::scalar_count() const { return scalar_count(""); }

std::size_t ParamStore::scalar_count(const std::string &prefix) const
{
    std::size_t n = 0;
    for (const auto &[name, t] : params_)
        if (name.starts_with(prefix)) n += t.numel();
    return n;
}

bool ParamStore::is_frozen(const std::string &name) const
{
    for (const auto &p : frozen_)
        if (name.starts_with(p)) return true;
    return false;
}

void ParamStore::zero_grad()
{
    for (auto &[name, t] : params_) t.zero_grad();
}

void ParamStore::copy_values_from(const ParamStore &other)
{
    if (other.params_.size() != params_.size())
        throw std::invalid_argument("parameter stores differ in size");
    for (auto &[name, t] : params_) {
        const auto &src = other.at(name);
        if (src.shape() != t.shape())
            throw ad::ShapeError("parameter " + name + ": shape " + ad::to_string(src.shape()) + " vs " +
                                 ad::to_string(t.shape()));
        std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
    }
}

void Optimizer::step(ParamStore &store, double lr)
{
    for (const auto &[name, t] : store.all()) {
        if (store.is_frozen(name)) continue;
        Tensor p = t;
        ad::adam_update(p, t.grad(), slots_[name], config_, lr);
    }
}

Conv::Conv(ParamStore &store, const std::string &name, std::size_t in, std::size_t out, std::size_t k,
           std::size_t stride_, std::size_t padding_, CounterRng &rng, bool with_bias, double stddev)
    : stride(stride_), padding(padding_)
{
    weight = stddev < 0 ? store.kaiming(name + ".weight", {out, in, k, k}, in * k * k, rng)
                        : store.normal(name + ".weight", {out, in, k, k}, stddev, rng);
    if (with_bias) bias = store.zeros(name + ".bias", {out});
}

Dense::Dense(ParamStore &store, const std::string &name, std::size_t in, std::size_t out, CounterRng &rng,
             double stddev)
{
    weight = stddev < 0 ? store.kaiming(name + ".weight", {in, out}, in, rng)
                        : store.normal(name + ".weight", {in, out}, stddev, rng);
    bias = store.zeros(name + ".bias", {out});
}

} // namespace mcvae::nn
