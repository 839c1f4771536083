#include "mcvae/strategy/assembly.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace mcvae::strategy {

using data::kJointCount;

namespace {

std::string lowered(std::string_view s)
{
    std::string out(s);
    for (auto &c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool row_is_zero(const Tensor &x, std::size_t row)
{
    const std::size_t per = x.numel() / x.dim(0);
    const auto d = x.data().subspan(row * per, per);
    return std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
}

// Row-major [N, D] normals, row i drawn from rows[i].
Tensor row_normals(std::vector<CounterRng> &rows, std::size_t d)
{
    std::vector<double> v;
    v.reserve(rows.size() * d);
    for (auto &r : rows)
        for (std::size_t k = 0; k < d; ++k) v.push_back(r.normal());
    return Tensor::from({rows.size(), d}, std::move(v));
}

std::vector<CounterRng> row_streams(const std::vector<std::uint64_t> &keys, std::uint64_t stream)
{
    std::vector<CounterRng> rows;
    rows.reserve(keys.size());
    for (auto k : keys) rows.emplace_back(k, stream);
    return rows;
}

} // namespace

std::string_view to_string(Kind k)
{
    switch (k) {
    case Kind::fine_tune: return "finetune";
    case Kind::feature_fusion: return "fusion";
    case Kind::rdf: return "rdf";
    case Kind::mcvae: return "mcvae";
    }
    return "?";
}

std::string_view display_name(Kind k)
{
    switch (k) {
    case Kind::fine_tune: return "FineTune";
    case Kind::feature_fusion: return "FeatureFusion";
    case Kind::rdf: return "RDF";
    case Kind::mcvae: return "MCVAE";
    }
    return "?";
}

Kind parse_kind(std::string_view s)
{
    const std::string k = lowered(s);
    if (k == "finetune" || k == "fine_tune" || k == "fine-tune") return Kind::fine_tune;
    if (k == "fusion" || k == "featurefusion" || k == "feature_fusion") return Kind::feature_fusion;
    if (k == "rdf") return Kind::rdf;
    if (k == "mcvae" || k == "mc-vae") return Kind::mcvae;
    throw std::invalid_argument("unknown strategy '" + std::string(s) +
                                "' (expected finetune, fusion, rdf or mcvae)");
}

Batch make_batch(std::span<const data::Sample> samples, bool with_m2, double sigma)
{
    if (samples.empty()) throw std::invalid_argument("make_batch: empty batch");
    const std::size_t n = samples.size();
    const auto &first = samples.front();
    const std::size_t h = first.m1.height, w = first.m1.width;
    const std::size_t c1 = first.m1.channels, c2 = first.m2.channels;
    const std::size_t maps = kJointCount * pose::kGrid * pose::kGrid;

    std::vector<double> m1, m2, targets, mask;
    m1.reserve(n * c1 * h * w);
    if (with_m2) m2.reserve(n * c2 * h * w);
    targets.reserve(n * maps);
    mask.reserve(n * maps);
    for (const auto &s : samples) {
        if (s.m1.channels != c1 || s.m1.height != h || s.m1.width != w || s.m2.channels != c2)
            throw ad::ShapeError("make_batch: samples have differing image shapes");
        m1.insert(m1.end(), s.m1.pixels.begin(), s.m1.pixels.end());
        if (with_m2) m2.insert(m2.end(), s.m2.pixels.begin(), s.m2.pixels.end());
        const auto t = pose::heatmap_targets(s.joints, s.visible, sigma);
        targets.insert(targets.end(), t.begin(), t.end());
        for (std::size_t j = 0; j < kJointCount; ++j)
            mask.insert(mask.end(), pose::kGrid * pose::kGrid, s.visible[j] ? 1.0 : 0.0);
    }
    Batch b;
    b.m1 = Tensor::from({n, c1, h, w}, std::move(m1));
    if (with_m2) b.m2 = Tensor::from({n, c2, h, w}, std::move(m2));
    b.targets = Tensor::from({n, kJointCount, pose::kGrid, pose::kGrid}, std::move(targets));
    b.mask = Tensor::from({n, kJointCount, pose::kGrid, pose::kGrid}, std::move(mask));
    return b;
}

Tensor replicate_channels(const Tensor &m1, std::size_t channels)
{
    if (m1.shape().size() != 4 || m1.dim(1) != 1)
        throw ad::ShapeError("replicate_channels: expected [N,1,H,W], got " + ad::to_string(m1.shape()));
    const std::size_t n = m1.dim(0), plane = m1.dim(2) * m1.dim(3);
    std::vector<double> out;
    out.reserve(n * channels * plane);
    const auto d = m1.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            out.insert(out.end(), d.begin() + i * plane, d.begin() + (i + 1) * plane);
    return Tensor::from({n, channels, m1.dim(2), m1.dim(3)}, std::move(out));
}

std::vector<bool> rdf_drop_mask(std::size_t n, double p, CounterRng &rng)
{
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("rdf_p must lie in [0, 1]");
    std::vector<bool> drop(n);
    for (std::size_t i = 0; i < n; ++i) drop[i] = rng.bernoulli(p);
    return drop;
}

Assembly::Assembly(Kind kind, const ModelConfig &cfg, std::uint64_t seed) : kind_(kind), cfg_(cfg)
{
    CounterRng rng(seed, 0x1417);
    const std::size_t late = cfg.trunk.out_channels;
    if (kind == Kind::fine_tune) {
        stem1_ = model::Stem(params_, "stem", cfg.stem.m2_channels, cfg.stem, rng);
        trunk1_ = model::Trunk(params_, "trunk", cfg.stem, cfg.trunk, rng);
        head_ = pose::HeatmapHead(params_, "head", late, rng);
        return;
    }
    stem1_ = model::Stem(params_, "stem1", cfg.stem.m1_channels, cfg.stem, rng);
    stem2_ = model::Stem(params_, "stem2", cfg.stem.m2_channels, cfg.stem, rng);
    trunk1_ = model::Trunk(params_, "trunk1", cfg.stem, cfg.trunk, rng);
    trunk2_ = model::Trunk(params_, "trunk2", cfg.stem, cfg.trunk, rng);
    fusion_ = model::AttentionFusion(params_, "fusion", late, cfg.fusion_ratio, rng);
    head_ = pose::HeatmapHead(params_, "head", late, rng);
    if (kind == Kind::mcvae) vae_ = model::Mcvae(params_, "vae", cfg.stem, cfg.vae, rng);
}

const model::Stem &Assembly::stem(Modality m) const
{
    if (kind_ == Kind::fine_tune) return stem1_;
    return m == Modality::m1 ? stem1_ : stem2_;
}

const model::Trunk &Assembly::trunk(Modality m) const
{
    if (kind_ == Kind::fine_tune) return trunk1_;
    return m == Modality::m1 ? trunk1_ : trunk2_;
}

model::AttentionFusion::Result Assembly::fuse(const Tensor &f1, const Tensor &f2) const
{
    if (forced_fusion_weight) {
        Tensor w = Tensor::full(f1.shape(), *forced_fusion_weight);
        return {model::fuse_with_weights(f1, f2, w), w};
    }
    return fusion_.fuse(f1, f2);
}

Tensor Assembly::finetune_forward(const Tensor &images, Modality m) const
{
    if (kind_ != Kind::fine_tune) throw std::logic_error("finetune_forward on a non fine-tuning assembly");
    const Tensor x = m == Modality::m1 ? replicate_channels(images, cfg_.stem.m2_channels) : images;
    return head_.forward(trunk1_.forward(stem1_.forward(x)));
}

Output Assembly::fusion_forward(const Tensor &i1, const Tensor *i2) const
{
    if (i2 == nullptr) throw ModalityError("feature fusion requires both modalities");
    const Tensor f1 = trunk1_.forward(stem1_.forward(i1));
    const Tensor f2 = trunk2_.forward(ad::sigmoid(stem2_.forward(*i2)));
    auto r = fuse(f1, f2);
    Output out;
    out.heatmaps = head_.forward(r.fused);
    out.weights = r.weights;
    out.fused_rows = i1.dim(0);
    return out;
}

Output Assembly::rdf_forward(const Tensor &i1, const Tensor *i2, bool train, CounterRng &rng) const
{
    const std::size_t n = i1.dim(0);
    std::vector<bool> drop(n, true);
    if (i2 != nullptr) {
        if (i2->dim(0) != n) throw ad::ShapeError("rdf_forward: batch sizes of m1 and m2 differ");
        if (train) drop = rdf_drop_mask(n, cfg_.rdf_p, rng);
        else std::fill(drop.begin(), drop.end(), false);
        for (std::size_t i = 0; i < n; ++i)
            if (!drop[i] && row_is_zero(*i2, i)) drop[i] = true;
    }
    std::vector<std::size_t> keep, bypass;
    for (std::size_t i = 0; i < n; ++i) (drop[i] ? bypass : keep).push_back(i);

    const Tensor f1 = trunk1_.forward(stem1_.forward(i1));
    Output out;
    out.fused_rows = keep.size();
    if (keep.empty()) {
        out.heatmaps = head_.forward(f1);
        return out;
    }
    if (bypass.empty()) {
        auto r = fuse(f1, trunk2_.forward(ad::sigmoid(stem2_.forward(*i2))));
        out.heatmaps = head_.forward(r.fused);
        out.weights = r.weights;
        return out;
    }
    const Tensor i2_keep = ad::gather_rows(i2->detach(), keep);
    auto r = fuse(ad::gather_rows(f1, keep), trunk2_.forward(ad::sigmoid(stem2_.forward(i2_keep))));
    const Tensor fused_maps = head_.forward(r.fused);
    const Tensor bypass_maps = head_.forward(ad::gather_rows(f1, bypass));
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < keep.size(); ++k) order[keep[k]] = k;
    for (std::size_t k = 0; k < bypass.size(); ++k) order[bypass[k]] = keep.size() + k;
    out.heatmaps = ad::gather_rows(ad::concat({fused_maps, bypass_maps}, 0), order);
    out.weights = r.weights;
    return out;
}

Output Assembly::mcvae_forward(const Tensor &i1, const Tensor *i2, bool train, CounterRng &rng, double beta) const
{
    if (kind_ != Kind::mcvae) throw std::logic_error("mcvae_forward on a non MC-VAE assembly");
    const Tensor x1 = stem1_.forward(i1);
    Output out;
    Tensor xhat;
    if (train) {
        if (i2 == nullptr) throw ModalityError("MC-VAE training requires both modalities");
        const Tensor x2 = stem2_.forward(*i2);
        const Tensor target = ad::sigmoid(x2).detach();
        const auto code = vae_.sample_joint_posterior(x1, x2, rng);
        const auto elbo = vae_.elbo_loss(target, code, beta);
        xhat = elbo.xhat;
        out.losses.reg = elbo.loss;
        const Tensor cond = vae_.reconstruct_conditional(x1, rng, cfg_.recon_draws);
        out.losses.recon = model::recon_loss(cond, target);
    } else {
        xhat = vae_.reconstruct_conditional(x1, rng, cfg_.recon_draws);
    }
    auto r = fuse(trunk1_.forward(x1), trunk2_.forward(xhat));
    out.heatmaps = head_.forward(r.fused);
    out.weights = r.weights;
    out.fused_rows = i1.dim(0);
    return out;
}

Losses Assembly::pose_only(const Tensor &heatmaps, const Batch &batch) const
{
    Losses l;
    l.pose = pose::pose_loss(heatmaps, batch.targets, batch.mask);
    l.total = l.pose;
    return l;
}

Output Assembly::train_forward(const Batch &batch, CounterRng &rng, double beta) const
{
    const Tensor *i2 = batch.m2 ? &*batch.m2 : nullptr;
    Output out;
    switch (kind_) {
    case Kind::fine_tune:
        if (finetune_phase == 1) {
            if (i2 == nullptr) throw ModalityError("fine-tuning phase 1 requires modality 2");
            out.heatmaps = finetune_forward(*i2, Modality::m2);
        } else {
            out.heatmaps = finetune_forward(batch.m1, Modality::m1);
        }
        break;
    case Kind::feature_fusion: out = fusion_forward(batch.m1, i2); break;
    case Kind::rdf: out = rdf_forward(batch.m1, i2, true, rng); break;
    case Kind::mcvae: {
        out = mcvae_forward(batch.m1, i2, true, rng, beta);
        Losses l = pose_only(out.heatmaps, batch);
        l.reg = out.losses.reg;
        l.recon = out.losses.recon;
        l.total = ad::add(l.pose, ad::add(ad::scale(l.reg, cfg_.lambda_reg), ad::scale(l.recon, cfg_.lambda_recon)));
        out.losses = l;
        return out;
    }
    }
    out.losses = pose_only(out.heatmaps, batch);
    return out;
}

Output Assembly::infer(const Batch &batch, CounterRng &rng, bool single_modality) const
{
    const Tensor *i2 = batch.m2 ? &*batch.m2 : nullptr;
    Output out;
    switch (kind_) {
    case Kind::fine_tune: out.heatmaps = finetune_forward(batch.m1, Modality::m1); break;
    case Kind::feature_fusion:
        if (single_modality) throw ModalityError("feature fusion requires both modalities");
        out = fusion_forward(batch.m1, i2);
        break;
    case Kind::rdf: out = rdf_forward(batch.m1, single_modality ? nullptr : i2, false, rng); break;
    case Kind::mcvae: {
        if (batch.row_keys.empty()) {
            out = mcvae_forward(batch.m1, nullptr, false, rng, 1.0);
        } else {
            if (batch.row_keys.size() != batch.size()) throw std::invalid_argument("infer: one row key per sample");
            // Same path as mcvae_forward at inference, with per-row noise.
            const Tensor x1 = stem1_.forward(batch.m1);
            auto rows = row_streams(batch.row_keys, 0xc0de);
            std::vector<Tensor> eps;
            for (std::size_t k = 0; k < cfg_.recon_draws; ++k) eps.push_back(row_normals(rows, cfg_.vae.latent_dim));
            auto r = fuse(trunk1_.forward(x1), trunk2_.forward(vae_.reconstruct_conditional(x1, eps)));
            out.heatmaps = head_.forward(r.fused);
            out.weights = r.weights;
            out.fused_rows = batch.size();
        }
        out.losses = pose_only(out.heatmaps, batch);
        if (i2 != nullptr) {
            // Held-out losses against the real m2 tap.
            const Tensor x1 = stem1_.forward(batch.m1);
            const Tensor x2 = stem2_.forward(*i2);
            const Tensor target = ad::sigmoid(x2).detach();
            if (batch.row_keys.empty()) {
                CounterRng aux = rng.derive(0x5eed);
                out.losses.recon =
                    model::recon_loss(vae_.reconstruct_conditional(x1, aux, cfg_.recon_draws), target);
                out.losses.reg = vae_.elbo_loss(target, vae_.sample_joint_posterior(x1, x2, aux), 1.0).loss;
            } else {
                auto rows = row_streams(batch.row_keys, 0x5eed);
                std::vector<Tensor> eps;
                for (std::size_t k = 0; k < cfg_.recon_draws; ++k)
                    eps.push_back(row_normals(rows, cfg_.vae.latent_dim));
                out.losses.recon = model::recon_loss(vae_.reconstruct_conditional(x1, eps), target);
                std::vector<bool> from_m2;
                for (auto &r : rows) from_m2.push_back(r.bernoulli(vae_.config().alpha[1]));
                const Tensor e = row_normals(rows, cfg_.vae.latent_dim);
                out.losses.reg = vae_.elbo_loss(target, vae_.sample_joint_posterior(x1, x2, from_m2, e), 1.0).loss;
            }
        }
        return out;
    }
    }
    out.losses = pose_only(out.heatmaps, batch);
    return out;
}

} // namespace mcvae::strategy
