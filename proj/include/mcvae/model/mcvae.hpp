#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mcvae/model/backbone.hpp"

namespace mcvae::model {

/// Gaussian code for a batch: rows are samples, columns latent dimensions.
struct LatentCode {
    Tensor mu;      // [N, D]
    Tensor logvar;  // [N, D]
    Tensor z;       // [N, D] = mu + exp(logvar / 2) * eps
    Tensor eps;     // [N, D], constant
    // Mixture draws only: true where the m2 expert produced the row.
    std::vector<bool> from_m2;
};

struct McvaeConfig {
    std::size_t latent_dim = 64;
    std::size_t width = 32;
    // Fixed mixture weights of the joint posterior; not trained.
    std::array<double, 2> alpha = {0.5, 0.5};
};

/// Standard normal noise of the given shape.
Tensor standard_normal(const Shape &shape, CounterRng &rng);

/// Closed-form KL(N(mu, exp(logvar)) || N(0, I)) per row: [N, D] -> [N].
Tensor kl_to_standard_normal(const Tensor &mu, const Tensor &logvar);

/// log of alpha1 N(z; mu1, var1) + alpha2 N(z; mu2, var2) for one latent
/// vector; used as a density oracle for the mixture posterior.
double mixture_log_density(std::span<const double> z, std::span<const double> mu1, std::span<const double> logvar1,
                           std::span<const double> mu2, std::span<const double> logvar2,
                           const std::array<double, 2> &alpha);

/// Batch-mean of per-sample Euclidean norms ||xhat - x||_2 over the whole
/// feature block.
Tensor recon_loss(const Tensor &xhat, const Tensor &x);

/// Two modality encoders q(z | X_m), a mixture joint posterior and a shared
/// decoder p(X2 | z) whose output lies in (0, 1).
class Mcvae {
public:
    Mcvae() = default;
    Mcvae(nn::ParamStore &store, const std::string &prefix, const StemConfig &stem, const McvaeConfig &cfg,
          CounterRng &rng);

    /// q(z | X_m) with eps drawn from rng (or zero when rng is null).
    LatentCode encode(const Tensor &x, Modality which, CounterRng *rng) const;
    /// Same, with caller-supplied eps.
    LatentCode encode(const Tensor &x, Modality which, const Tensor &eps) const;

    /// Mixture sampling: each row picks expert m with probability alpha_m,
    /// then draws from that expert.
    LatentCode sample_joint_posterior(const Tensor &x1, const Tensor &x2, CounterRng &rng) const;
    /// Mixture sampling with the expert choices and eps fixed by the caller.
    LatentCode sample_joint_posterior(const Tensor &x1, const Tensor &x2, const std::vector<bool> &from_m2,
                                      const Tensor &eps) const;

    Tensor decode(const Tensor &z) const;

    struct Elbo {
        Tensor loss;      // batch mean of recon_nll + beta * kl
        Tensor recon_nll; // batch mean, unit-variance Gaussian, constants dropped
        Tensor kl;        // batch mean
        Tensor xhat;      // decoded features
    };
    /// Negated single-sample ELBO for a joint-posterior code against the
    /// (0,1)-squashed m2 target.
    Elbo elbo_loss(const Tensor &x2_target, const LatentCode &code, double beta) const;

    /// Average of `draws` decodes of z ~ q(z | X1). Reads neither encoder 2
    /// nor any m2 input.
    Tensor reconstruct_conditional(const Tensor &x1, CounterRng &rng, std::size_t draws = 1) const;
    /// Same with the noise supplied: one [N, D] tensor per draw.
    Tensor reconstruct_conditional(const Tensor &x1, std::span<const Tensor> eps) const;

    const McvaeConfig &config() const { return cfg_; }
    const std::string &prefix() const { return prefix_; }

private:
    struct Encoder {
        std::array<nn::Conv, 3> convs;
        nn::Dense mu;
        nn::Dense logvar;
    };

    const Encoder &encoder(Modality m) const { return m == Modality::m1 ? enc1_ : enc2_; }
    void require_tap(const Tensor &x, const char *where) const;

    std::string prefix_;
    StemConfig stem_;
    McvaeConfig cfg_;
    Encoder enc1_;
    Encoder enc2_;
    nn::Dense dec_in_;
    std::array<nn::Conv, 3> dec_convs_;
    std::size_t bottleneck_size_ = 0;
};

} // namespace mcvae::model
