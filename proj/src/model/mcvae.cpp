#include "mcvae/model/mcvae.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>

namespace mcvae::model {

Tensor standard_normal(const Shape &shape, CounterRng &rng)
{
    std::vector<double> v(ad::numel(shape));
    for (auto &x : v) x = rng.normal();
    return Tensor::from(shape, std::move(v));
}

Tensor kl_to_standard_normal(const Tensor &mu, const Tensor &logvar)
{
    // 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar)
    Tensor t = ad::sub(ad::add(ad::mul(mu, mu), ad::exp(logvar)), logvar);
    return ad::scale(ad::sum_rows(ad::add_scalar(t, -1.0)), 0.5);
}

double mixture_log_density(std::span<const double> z, std::span<const double> mu1, std::span<const double> logvar1,
                           std::span<const double> mu2, std::span<const double> logvar2,
                           const std::array<double, 2> &alpha)
{
    auto log_normal = [&](std::span<const double> mu, std::span<const double> lv) {
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double d = z[i] - mu[i];
            acc += -0.5 * (std::log(2.0 * std::numbers::pi) + lv[i] + d * d / std::exp(lv[i]));
        }
        return acc;
    };
    const double a = std::log(alpha[0]) + log_normal(mu1, logvar1);
    const double b = std::log(alpha[1]) + log_normal(mu2, logvar2);
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

Tensor recon_loss(const Tensor &xhat, const Tensor &x)
{
    if (xhat.shape() != x.shape())
        throw ad::ShapeError("recon_loss: shape mismatch " + ad::to_string(xhat.shape()) + " vs " +
                             ad::to_string(x.shape()));
    return ad::mean(ad::sqrt(ad::sum_rows(ad::squared_difference(xhat, x))));
}

Mcvae::Mcvae(nn::ParamStore &store, const std::string &prefix, const StemConfig &stem, const McvaeConfig &cfg,
             CounterRng &rng)
    : prefix_(prefix), stem_(stem), cfg_(cfg)
{
    if (std::abs(cfg.alpha[0] + cfg.alpha[1] - 1.0) > 1e-12 || cfg.alpha[0] < 0 || cfg.alpha[1] < 0)
        throw std::invalid_argument("mixture weights must be non-negative and sum to 1");
    if (stem.tap_size % 8 != 0) throw std::invalid_argument("mcvae: tap size must be divisible by 8");
    bottleneck_size_ = stem.tap_size / 8;
    const auto w = cfg.width, D = cfg.latent_dim;
    const auto flat = w * bottleneck_size_ * bottleneck_size_;
    for (auto [enc, name] : {std::pair{&enc1_, ".enc1"}, std::pair{&enc2_, ".enc2"}}) {
        const auto p = prefix + name;
        enc->convs[0] = nn::Conv(store, p + ".conv0", stem.tap_channels, w, 4, 2, 1, rng);
        enc->convs[1] = nn::Conv(store, p + ".conv1", w, w, 4, 2, 1, rng);
        enc->convs[2] = nn::Conv(store, p + ".conv2", w, w, 4, 2, 1, rng);
        enc->mu = nn::Dense(store, p + ".mu", flat, D, rng, std::sqrt(1.0 / double(flat)));
        enc->logvar = nn::Dense(store, p + ".logvar", flat, D, rng, 0.01);
    }
    dec_in_ = nn::Dense(store, prefix + ".dec.in", D, flat, rng);
    dec_convs_[0] = nn::Conv(store, prefix + ".dec.conv0", w, w, 3, 1, 1, rng);
    dec_convs_[1] = nn::Conv(store, prefix + ".dec.conv1", w, w, 3, 1, 1, rng);
    dec_convs_[2] = nn::Conv(store, prefix + ".dec.conv2", w, stem.tap_channels, 3, 1, 1, rng);
}

void Mcvae::require_tap(const Tensor &x, const char *where) const
{
    require_nchw(x, stem_.tap_channels, stem_.tap_size, stem_.tap_size, where);
}

LatentCode Mcvae::encode(const Tensor &x, Modality which, CounterRng *rng) const
{
    require_tap(x, "mcvae encode");
    const Shape shape{x.dim(0), cfg_.latent_dim};
    return encode(x, which, rng ? standard_normal(shape, *rng) : Tensor::zeros(shape));
}

LatentCode Mcvae::encode(const Tensor &x, Modality which, const Tensor &eps) const
{
    require_tap(x, "mcvae encode");
    const auto &enc = encoder(which);
    Tensor h = x;
    for (const auto &c : enc.convs) h = ad::relu(c(h));
    h = ad::reshape(h, {x.dim(0), h.numel() / x.dim(0)});
    LatentCode code;
    code.mu = enc.mu(h);
    code.logvar = enc.logvar(h);
    code.eps = eps;
    code.z = ad::reparameterize(code.mu, code.logvar, eps);
    return code;
}

LatentCode Mcvae::sample_joint_posterior(const Tensor &x1, const Tensor &x2, CounterRng &rng) const
{
    const std::size_t n = x1.dim(0);
    std::vector<bool> from_m2(n);
    for (std::size_t i = 0; i < n; ++i) from_m2[i] = rng.bernoulli(cfg_.alpha[1]);
    return sample_joint_posterior(x1, x2, from_m2, standard_normal({n, cfg_.latent_dim}, rng));
}

LatentCode Mcvae::sample_joint_posterior(const Tensor &x1, const Tensor &x2, const std::vector<bool> &from_m2,
                                         const Tensor &eps) const
{
    if (x1.shape() != x2.shape())
        throw ad::ShapeError("joint posterior: tap shapes differ " + ad::to_string(x1.shape()) + " vs " +
                             ad::to_string(x2.shape()));
    const auto q1 = encode(x1, Modality::m1, eps);
    const auto q2 = encode(x2, Modality::m2, eps);
    LatentCode code;
    code.mu = ad::select_rows(q1.mu, q2.mu, from_m2);
    code.logvar = ad::select_rows(q1.logvar, q2.logvar, from_m2);
    code.eps = eps;
    code.z = ad::reparameterize(code.mu, code.logvar, eps);
    code.from_m2 = from_m2;
    return code;
}

Tensor Mcvae::decode(const Tensor &z) const
{
    if (z.shape().size() != 2 || z.dim(1) != cfg_.latent_dim)
        throw ad::ShapeError("decode: expected [N," + std::to_string(cfg_.latent_dim) + "], got " +
                             ad::to_string(z.shape()));
    const auto b = bottleneck_size_;
    Tensor h = ad::relu(dec_in_(z));
    h = ad::reshape(h, {z.dim(0), cfg_.width, b, b});
    h = ad::relu(dec_convs_[0](ad::upsample_nearest(h, 2)));
    h = ad::relu(dec_convs_[1](ad::upsample_nearest(h, 2)));
    // A bare sigmoid rounds to exactly 1.0 past about 37; the margin keeps
    // every output strictly inside (0, 1).
    constexpr double margin = 1e-7;
    const Tensor s = ad::sigmoid(dec_convs_[2](ad::upsample_nearest(h, 2)));
    Tensor out = ad::add_scalar(ad::scale(s, 1.0 - 2.0 * margin), margin);
#ifndef NDEBUG
    for (double v : out.data()) assert(v > 0.0 && v < 1.0);
#endif
    return out;
}

Mcvae::Elbo Mcvae::elbo_loss(const Tensor &x2_target, const LatentCode &code, double beta) const
{
    if (beta < 0.0) throw std::invalid_argument("elbo_loss: beta must be non-negative");
    require_tap(x2_target, "elbo target");
    Elbo e;
    e.xhat = decode(code.z);
    e.recon_nll = ad::scale(ad::mean(ad::sum_rows(ad::squared_difference(e.xhat, x2_target))), 0.5);
    e.kl = ad::mean(kl_to_standard_normal(code.mu, code.logvar));
    e.loss = ad::add(e.recon_nll, ad::scale(e.kl, beta));
    return e;
}

Tensor Mcvae::reconstruct_conditional(const Tensor &x1, CounterRng &rng, std::size_t draws) const
{
    if (draws == 0) throw std::invalid_argument("reconstruct_conditional: need at least one draw");
    require_tap(x1, "mcvae encode");
    std::vector<Tensor> eps;
    for (std::size_t k = 0; k < draws; ++k) eps.push_back(standard_normal({x1.dim(0), cfg_.latent_dim}, rng));
    return reconstruct_conditional(x1, eps);
}

Tensor Mcvae::reconstruct_conditional(const Tensor &x1, std::span<const Tensor> eps) const
{
    if (eps.empty()) throw std::invalid_argument("reconstruct_conditional: need at least one draw");
    const auto q = encode(x1, Modality::m1, Tensor::zeros({x1.dim(0), cfg_.latent_dim}));
    Tensor acc;
    for (const auto &e : eps) {
        const Tensor x = decode(ad::reparameterize(q.mu, q.logvar, e));
        acc = acc.defined() ? ad::add(acc, x) : x;
    }
    return eps.size() == 1 ? acc : ad::scale(acc, 1.0 / double(eps.size()));
}

} // namespace mcvae::model
