#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mcvae/data/sample.hpp"
#include "mcvae/model/backbone.hpp"
#include "mcvae/model/fusion.hpp"
#include "mcvae/model/mcvae.hpp"
#include "mcvae/pose/pose.hpp"

namespace mcvae::strategy {

using ad::Tensor;
using model::Modality;

enum class Kind { fine_tune, feature_fusion, rdf, mcvae };

std::string_view to_string(Kind k);
/// Accepts "finetune", "fusion", "rdf", "mcvae" (and the display names).
Kind parse_kind(std::string_view s);
/// Display name used in reports.
std::string_view display_name(Kind k);

/// Raised when an assembly is asked to infer from inputs it cannot use.
class ModalityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
    model::StemConfig stem;
    model::TrunkConfig trunk;
    model::McvaeConfig vae;
    std::size_t fusion_ratio = 4;
    double rdf_p = 0.5;
    double lambda_reg = 1.0;
    double lambda_recon = 1.0;
    std::size_t recon_draws = 1;
    double heatmap_sigma = 1.0;
};

/// Model inputs and heatmap targets for a batch of samples.
struct Batch {
    Tensor m1;                 // [N,1,64,64]
    std::optional<Tensor> m2;  // [N,3,64,64]
    Tensor targets;            // [N,14,16,16]
    Tensor mask;               // [N,14,16,16], 1 on maps of visible joints
    // Optional per-row noise keys for inference. When set, the MC-VAE draws
    // each row's noise from its own stream, so a row's prediction does not
    // depend on the rest of the batch.
    std::vector<std::uint64_t> row_keys;
    std::size_t size() const { return m1.dim(0); }
};

Batch make_batch(std::span<const data::Sample> samples, bool with_m2, double sigma);

/// Grey image repeated into three channels for the shared fine-tuning stem.
Tensor replicate_channels(const Tensor &m1, std::size_t channels);

/// Per-row m2 dropout decisions for robust dynamic fusion.
std::vector<bool> rdf_drop_mask(std::size_t n, double p, CounterRng &rng);

struct Losses {
    Tensor pose;
    Tensor reg;    // MC-VAE only
    Tensor recon;  // MC-VAE only
    Tensor total;
};

struct Output {
    Tensor heatmaps;
    std::optional<Tensor> weights;  // fusion weights for rows that were fused
    Losses losses;                  // filled when targets were supplied
    std::size_t fused_rows = 0;
};

/// One end-to-end model: fine-tuning, feature fusion, robust dynamic fusion
/// or the MC-VAE assembly. Parameters live in params() under stable names.
class Assembly {
public:
    Assembly(Kind kind, const ModelConfig &cfg, std::uint64_t seed);
    Assembly(const Assembly &) = delete;
    Assembly &operator=(const Assembly &) = delete;
    Assembly(Assembly &&) = default;
    Assembly &operator=(Assembly &&) = default;

    Kind kind() const { return kind_; }
    const ModelConfig &config() const { return cfg_; }
    nn::ParamStore &params() { return params_; }
    const nn::ParamStore &params() const { return params_; }

    /// Whether inference can run from modality 1 alone.
    bool accepts_single_modality() const { return kind_ != Kind::feature_fusion; }

    // Fine-tuning: a single 3-channel stem, trunk and head. Modality 1 is
    // replicated into three channels.
    Tensor finetune_forward(const Tensor &images, Modality m) const;
    /// Source modality of fine-tuning training: phase 1 uses m2, phase 2 m1.
    int finetune_phase = 1;

    /// Parallel trunks fused by attention. The second trunk always reads the
    /// sigmoid-squashed m2 tap, the same range the MC-VAE decoder produces.
    /// Throws ModalityError when m2 is missing.
    Output fusion_forward(const Tensor &i1, const Tensor *i2) const;

    /// Training: each m2 row is zeroed with probability rdf_p. Rows whose m2
    /// is zero or absent bypass fusion and feed the m1 late feature straight
    /// to the head.
    Output rdf_forward(const Tensor &i1, const Tensor *i2, bool train, CounterRng &rng) const;

    /// Training needs m2: reconstructs the m2 tap from a joint-posterior
    /// draw and feeds that (never the raw tap) to the second trunk.
    /// Inference reads m1 only and reconstructs the m2 tap from it.
    Output mcvae_forward(const Tensor &i1, const Tensor *i2, bool train, CounterRng &rng, double beta) const;

    /// Training forward with all losses for this kind.
    Output train_forward(const Batch &batch, CounterRng &rng, double beta) const;

    /// Deployment-style inference: m1 only, except feature fusion which
    /// requires both. Losses are computed against `batch` targets; for MC-VAE
    /// the held-out reconstruction losses use batch.m2 when present. Feature
    /// fusion throws ModalityError whenever single_modality is set.
    Output infer(const Batch &batch, CounterRng &rng, bool single_modality = true) const;

    /// Excludes every stem parameter from optimizer updates.
    void freeze_stem() { params_.freeze("stem"); }
    void unfreeze_stem() { params_.unfreeze("stem"); }

    /// Test hook: replaces the learned fusion weights by a constant.
    std::optional<double> forced_fusion_weight;

    const model::Stem &stem(Modality m) const;
    const model::Trunk &trunk(Modality m) const;
    const model::Mcvae &vae() const { return vae_; }
    const model::AttentionFusion &fusion() const { return fusion_; }
    const pose::HeatmapHead &head() const { return head_; }

private:
    model::AttentionFusion::Result fuse(const Tensor &f1, const Tensor &f2) const;
    Losses pose_only(const Tensor &heatmaps, const Batch &batch) const;

    Kind kind_;
    ModelConfig cfg_;
    nn::ParamStore params_;
    model::Stem stem1_;
    model::Stem stem2_;
    model::Trunk trunk1_;
    model::Trunk trunk2_;
    model::Mcvae vae_;
    model::AttentionFusion fusion_;
    pose::HeatmapHead head_;
};

} // namespace mcvae::strategy
