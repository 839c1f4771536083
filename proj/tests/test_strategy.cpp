#include <gtest/gtest.h>

#include <set>

#include "mcvae/data/synth.hpp"
#include "mcvae/pose/pose.hpp"
#include "mcvae/strategy/assembly.hpp"
#include "support.hpp"

using namespace mcvae;
using namespace mcvae::strategy;
using mcvae::testing::check_gradient;
using model::Modality;

namespace {

const std::vector<data::Sample> &samples()
{
    static const auto s = data::generate_dataset(3, 2, 3);
    return s;
}

Batch batch(std::size_t n, bool with_m2, std::size_t offset = 0)
{
    return make_batch(std::span(samples()).subspan(offset, n), with_m2, 1.0);
}

std::vector<double> values(const Tensor &t) { return {t.data().begin(), t.data().end()}; }

// Every node reachable from `root`.
std::set<const ad::Node *> graph_of(const Tensor &root)
{
    std::set<const ad::Node *> seen;
    std::vector<const ad::Node *> stack = {root.ptr().get()};
    while (!stack.empty()) {
        const auto *n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        for (const auto &in : n->inputs) stack.push_back(in.get());
    }
    return seen;
}

bool reads(const Tensor &root, const Tensor &input) { return graph_of(root).count(input.ptr().get()) != 0; }

void perturb(nn::ParamStore &store, const std::string &prefix)
{
    std::size_t touched = 0;
    for (auto &[name, t] : store.all())
        if (name.rfind(prefix, 0) == 0) {
            for (auto &v : const_cast<Tensor &>(t).mutable_data()) v = 0.5 - 2.0 * v;
            ++touched;
        }
    ASSERT_GT(touched, 0u) << prefix;
}

} // namespace

TEST(Kind, NamesRoundTrip)
{
    for (auto k : {Kind::fine_tune, Kind::feature_fusion, Kind::rdf, Kind::mcvae})
        EXPECT_EQ(parse_kind(to_string(k)), k);
    EXPECT_THROW(parse_kind("ensemble"), std::invalid_argument);
}

TEST(Contract, OnlyFeatureFusionNeedsBothModalities)
{
    ModelConfig cfg;
    EXPECT_TRUE(Assembly(Kind::fine_tune, cfg, 1).accepts_single_modality());
    EXPECT_FALSE(Assembly(Kind::feature_fusion, cfg, 1).accepts_single_modality());
    EXPECT_TRUE(Assembly(Kind::rdf, cfg, 1).accepts_single_modality());
    EXPECT_TRUE(Assembly(Kind::mcvae, cfg, 1).accepts_single_modality());

    Assembly ff(Kind::feature_fusion, cfg, 1);
    const auto b = batch(2, false);
    CounterRng rng(1, 1);
    try {
        ff.infer(b, rng);
        FAIL() << "expected ModalityError";
    } catch (const ModalityError &e) {
        EXPECT_STREQ(e.what(), "feature fusion requires both modalities");
    }
    EXPECT_THROW(ff.train_forward(b, rng, 1.0), ModalityError);
    EXPECT_NO_THROW(ff.infer(batch(2, true), rng, false));
    EXPECT_THROW(ff.infer(batch(2, true), rng, true), ModalityError);
}

TEST(FeatureFusion, ZeroWeightEqualsSingleStream)
{
    Assembly ff(Kind::feature_fusion, ModelConfig{}, 2);
    ff.forced_fusion_weight = 0.0;
    const auto b = batch(3, true);
    const auto out = ff.fusion_forward(b.m1, &*b.m2);
    const auto single = ff.head().forward(ff.trunk(Modality::m1).forward(ff.stem(Modality::m1).forward(b.m1)));
    EXPECT_EQ(values(out.heatmaps), values(single));
    EXPECT_FALSE(reads(single, *b.m2));
    EXPECT_TRUE(reads(out.heatmaps, *b.m2));
}

TEST(Rdf, MissingModalityIsTheDirectPath)
{
    Assembly rdf(Kind::rdf, ModelConfig{}, 3);
    const auto b = batch(4, true);
    CounterRng rng(3, 3);
    const auto out = rdf.infer(b, rng, true);
    const auto direct = rdf.head().forward(rdf.trunk(Modality::m1).forward(rdf.stem(Modality::m1).forward(b.m1)));
    EXPECT_EQ(values(out.heatmaps), values(direct));
    EXPECT_EQ(out.fused_rows, 0u);
    EXPECT_FALSE(out.weights.has_value());
    EXPECT_FALSE(reads(out.heatmaps, *b.m2));

    // An all-zero m2 also bypasses fusion, in training too.
    const auto zeros = Tensor::zeros(b.m2->shape());
    const auto z = rdf.rdf_forward(b.m1, &zeros, true, rng);
    EXPECT_EQ(values(z.heatmaps), values(direct));
}

TEST(Rdf, ZeroDropProbabilityIsFeatureFusion)
{
    ModelConfig cfg;
    cfg.rdf_p = 0.0;
    Assembly rdf(Kind::rdf, cfg, 4);
    Assembly ff(Kind::feature_fusion, cfg, 4);
    const auto b = batch(4, true);
    CounterRng r1(4, 4), r2(4, 4);
    const auto a = rdf.train_forward(b, r1, 1.0);
    const auto f = ff.train_forward(b, r2, 1.0);
    EXPECT_EQ(values(a.heatmaps), values(f.heatmaps));
    EXPECT_EQ(a.losses.total.item(), f.losses.total.item());
    EXPECT_EQ(a.fused_rows, 4u);
}

TEST(Rdf, DropFrequencyIsBinomial)
{
    CounterRng rng(5, 5);
    const auto drop = rdf_drop_mask(10000, 0.5, rng);
    const auto n = std::count(drop.begin(), drop.end(), true);
    EXPECT_NEAR(double(n), 5000.0, 150.0);
    EXPECT_THROW(rdf_drop_mask(3, 1.5, rng), std::invalid_argument);
}

TEST(Rdf, MixedBatchMatchesRowWisePaths)
{
    Assembly rdf(Kind::rdf, ModelConfig{}, 6);
    const auto b = batch(8, true);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        CounterRng rng(60, seed), copy(60, seed);
        const auto drop = rdf_drop_mask(8, 0.5, copy);
        const auto out = rdf.rdf_forward(b.m1, &*b.m2, true, rng);
        EXPECT_EQ(out.fused_rows, std::size_t(std::count(drop.begin(), drop.end(), false)));
        const auto fused = rdf.fusion_forward(b.m1, &*b.m2).heatmaps;
        const auto direct =
            rdf.head().forward(rdf.trunk(Modality::m1).forward(rdf.stem(Modality::m1).forward(b.m1)));
        const std::size_t per = out.heatmaps.numel() / 8;
        for (std::size_t i = 0; i < 8; ++i) {
            const auto &ref = drop[i] ? direct : fused;
            for (std::size_t k = 0; k < per; ++k)
                ASSERT_NEAR(out.heatmaps[i * per + k], ref[i * per + k], 1e-12) << "row " << i;
        }
    }
}

TEST(Mcvae, InferenceIgnoresSecondEncoderAndStem)
{
    Assembly m(Kind::mcvae, ModelConfig{}, 7);
    const auto b = batch(3, false);
    CounterRng r1(7, 7);
    const auto before = values(m.infer(b, r1).heatmaps);
    perturb(m.params(), "vae.enc2");
    perturb(m.params(), "stem2");
    CounterRng r2(7, 7);
    const auto out = m.infer(b, r2);
    EXPECT_EQ(values(out.heatmaps), before);
    EXPECT_TRUE(reads(out.heatmaps, b.m1));

    // Supplying m2 only adds held-out loss terms.
    const auto with = batch(3, true);
    CounterRng r3(7, 7);
    const auto held = m.infer(with, r3);
    EXPECT_EQ(values(held.heatmaps), before);
    EXPECT_FALSE(reads(held.heatmaps, *with.m2));
    EXPECT_TRUE(held.losses.recon.defined());
    EXPECT_TRUE(std::isfinite(held.losses.recon.item()));
}

TEST(Mcvae, TrainingNeedsBothModalitiesAndCombinesLosses)
{
    Assembly m(Kind::mcvae, ModelConfig{}, 8);
    CounterRng rng(8, 8);
    EXPECT_THROW(m.train_forward(batch(2, false), rng, 1.0), ModalityError);
    const auto out = m.train_forward(batch(2, true), rng, 0.5);
    const double pose = out.losses.pose.item(), reg = out.losses.reg.item(), recon = out.losses.recon.item();
    for (double v : {pose, reg, recon}) EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(out.losses.total.item(), pose + reg + recon, 1e-12);
    ASSERT_TRUE(out.weights.has_value());
    for (double w : out.weights->data()) ASSERT_TRUE(w >= 0.0 && w <= 1.0);
}

TEST(FineTune, PhaseTwoReadsOnlyModalityOne)
{
    Assembly ft(Kind::fine_tune, ModelConfig{}, 9);
    CounterRng rng(9, 9);
    EXPECT_THROW(ft.train_forward(batch(2, false), rng, 1.0), ModalityError);
    const auto both = batch(2, true);
    EXPECT_TRUE(reads(ft.train_forward(both, rng, 1.0).heatmaps, *both.m2));
    ft.finetune_phase = 2;
    const auto out = ft.train_forward(both, rng, 1.0);
    EXPECT_FALSE(reads(out.heatmaps, *both.m2));
    auto shifted = batch(2, true);
    for (auto &v : shifted.m1.mutable_data()) v = 1.0 - v;
    EXPECT_NE(values(ft.train_forward(shifted, rng, 1.0).heatmaps), values(out.heatmaps));
    EXPECT_EQ(values(out.heatmaps), values(ft.train_forward(batch(2, false), rng, 1.0).heatmaps));
    EXPECT_THROW(ft.fusion_forward(both.m1, nullptr), ModalityError);
}

TEST(FineTune, FrozenStemSurvivesPhaseTwo)
{
    Assembly ft(Kind::fine_tune, ModelConfig{}, 10);
    nn::Optimizer opt;
    CounterRng rng(10, 10);
    auto step = [&](const Batch &b) {
        ft.params().zero_grad();
        ad::backward(ft.train_forward(b, rng, 1.0).losses.total);
        opt.step(ft.params(), 1e-3);
    };
    for (int i = 0; i < 3; ++i) step(batch(4, true, std::size_t(i)));
    std::map<std::string, std::vector<double>> stem0, rest0;
    for (const auto &[name, t] : ft.params().all()) (name.rfind("stem", 0) == 0 ? stem0 : rest0)[name] = values(t);
    ft.freeze_stem();
    ft.finetune_phase = 2;
    for (int i = 0; i < 5; ++i) step(batch(4, false, std::size_t(i)));
    for (const auto &[name, v] : stem0) EXPECT_EQ(values(ft.params().at(name)), v) << name;
    std::size_t changed = 0;
    for (const auto &[name, v] : rest0) changed += values(ft.params().at(name)) != v;
    EXPECT_EQ(changed, rest0.size());
}

TEST(Assembly, SameSeedSameParameters)
{
    for (auto k : {Kind::fine_tune, Kind::feature_fusion, Kind::rdf, Kind::mcvae}) {
        Assembly a(k, ModelConfig{}, 11), b(k, ModelConfig{}, 11);
        ASSERT_EQ(a.params().all().size(), b.params().all().size());
        for (const auto &[name, t] : a.params().all()) EXPECT_EQ(values(t), values(b.params().at(name))) << name;
    }
}

// Finite differences through each complete training pass.
class AssemblyGradient : public ::testing::TestWithParam<Kind> {};

TEST_P(AssemblyGradient, MatchesFiniteDifferences)
{
    const Kind kind = GetParam();
    Assembly m(kind, ModelConfig{}, 12);
    const auto b = batch(2, true);
    auto loss = [&] {
        CounterRng rng(12, 12);
        return m.train_forward(b, rng, 1.0).losses.total;
    };
    // The MC-VAE reconstruction target is a stop-gradient copy of the m2
    // tap, so stem 2 is checked separately below with the target held fixed.
    std::vector<Tensor> leaves;
    for (auto &[name, t] : m.params().all())
        if (kind != Kind::mcvae || name.rfind("stem2", 0) != 0) leaves.push_back(t);
    const auto r = check_gradient(loss, leaves, 24, 13);
    EXPECT_GE(r.checked, 20u);
    EXPECT_LT(r.max_rel, 1e-4) << to_string(kind);
}

TEST(McvaeGradient, StemTwoWithFixedTarget)
{
    Assembly m(Kind::mcvae, ModelConfig{}, 14);
    const auto b = batch(2, true);
    const Tensor target = ad::sigmoid(m.stem(Modality::m2).forward(*b.m2)).detach();
    // The training objective spelled out from the components.
    auto replica = [&] {
        CounterRng rng(14, 14);
        const Tensor x1 = m.stem(Modality::m1).forward(b.m1);
        const Tensor x2 = m.stem(Modality::m2).forward(*b.m2);
        const auto code = m.vae().sample_joint_posterior(x1, x2, rng);
        const auto elbo = m.vae().elbo_loss(target, code, 1.0);
        const Tensor recon = model::recon_loss(m.vae().reconstruct_conditional(x1, rng, 1), target);
        const auto fused = m.fusion().fuse(m.trunk(Modality::m1).forward(x1), m.trunk(Modality::m2).forward(elbo.xhat));
        const Tensor pose = pose::pose_loss(m.head().forward(fused.fused), b.targets, b.mask);
        return ad::add(pose, ad::add(elbo.loss, recon));
    };
    CounterRng rng(14, 14);
    EXPECT_EQ(replica().item(), m.train_forward(b, rng, 1.0).losses.total.item());

    std::vector<Tensor> stem2;
    for (auto &[name, t] : m.params().all())
        if (name.rfind("stem2", 0) == 0) stem2.push_back(t);
    const auto r = check_gradient(replica, stem2, 24, 15);
    EXPECT_GE(r.checked, 20u);
    EXPECT_LT(r.max_rel, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, AssemblyGradient,
                         ::testing::Values(Kind::fine_tune, Kind::feature_fusion, Kind::rdf, Kind::mcvae),
                         [](const auto &info) { return std::string(to_string(info.param)); });

TEST(Mcvae, KeyedInferenceDoesNotDependOnBatchMates)
{
    Assembly m(Kind::mcvae, ModelConfig{}, 16);
    auto big = batch(4, true);
    big.row_keys = {11, 12, 13, 14};
    auto small = batch(2, true, 2);
    small.row_keys = {13, 14};
    CounterRng r1(1, 1), r2(2, 2);
    const auto a = m.infer(big, r1);
    const auto b = m.infer(small, r2);
    const std::size_t per = a.heatmaps.numel() / 4;
    for (std::size_t k = 0; k < 2 * per; ++k) ASSERT_NEAR(a.heatmaps[2 * per + k], b.heatmaps[k], 1e-12);

    perturb(m.params(), "vae.enc2");
    perturb(m.params(), "stem2");
    CounterRng r3(3, 3);
    const auto c = m.infer(small, r3);
    EXPECT_EQ(values(c.heatmaps), values(b.heatmaps));
    small.row_keys = {1};
    EXPECT_THROW(m.infer(small, r3), std::invalid_argument);
}
