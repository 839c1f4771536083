#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mcvae/model/backbone.hpp"
#include "mcvae/model/fusion.hpp"
#include "mcvae/model/mcvae.hpp"
#include "support.hpp"

using namespace mcvae;
using namespace mcvae::model;
using mcvae::testing::all_params;
using mcvae::testing::check_gradient;
using mcvae::testing::random_tensor;
using mcvae::testing::weighted_sum;

namespace {

std::vector<double> values(const Tensor &t) { return {t.data().begin(), t.data().end()}; }

std::vector<Tensor> with_prefix(nn::ParamStore &store, const std::string &prefix)
{
    std::vector<Tensor> v;
    for (auto &[name, t] : store.all())
        if (name.rfind(prefix, 0) == 0) v.push_back(t);
    return v;
}

// A small tap so the VAE statistics tests stay fast.
StemConfig small_tap()
{
    StemConfig s;
    s.tap_channels = 2;
    s.tap_size = 8;
    return s;
}

McvaeConfig small_vae()
{
    McvaeConfig c;
    c.latent_dim = 4;
    c.width = 4;
    return c;
}

} // namespace

// ---------------------------------------------------------------- backbone

TEST(Stem, TapShapeIsSharedByBothModalities)
{
    nn::ParamStore store;
    CounterRng rng(1, 0);
    StemConfig cfg;
    Stem s1(store, "stem1", cfg.m1_channels, cfg, rng);
    Stem s2(store, "stem2", cfg.m2_channels, cfg, rng);
    const auto a = s1.forward(random_tensor({2, 1, 64, 64}, rng, false, 0, 1));
    const auto b = s2.forward(random_tensor({2, 3, 64, 64}, rng, false, 0, 1));
    EXPECT_EQ(a.shape(), (Shape{2, 16, 16, 16}));
    EXPECT_EQ(b.shape(), a.shape());
    EXPECT_THROW(s1.forward(random_tensor({2, 3, 64, 64}, rng)), ad::ShapeError);
    EXPECT_THROW(s2.forward(random_tensor({2, 3, 32, 32}, rng)), ad::ShapeError);
}

TEST(Stem, ZeroImageSeesOnlyBiases)
{
    nn::ParamStore store;
    CounterRng rng(2, 0);
    StemConfig cfg;
    Stem stem(store, "stem", 3, cfg, rng);
    const auto zero = Tensor::zeros({2, 3, 64, 64});
    const auto out = values(stem.forward(zero));
    EXPECT_EQ(values(stem.forward(Tensor::zeros({2, 3, 64, 64}))), out);
    const std::size_t per = out.size() / 2;
    EXPECT_TRUE(std::equal(out.begin(), out.begin() + std::ptrdiff_t(per), out.begin() + std::ptrdiff_t(per)));
    // The first layer's kernel multiplies zeros only.
    for (auto &w : store.at("stem.conv0.weight").mutable_data()) w *= -3.0;
    EXPECT_EQ(values(stem.forward(zero)), out);
}

TEST(Stem, ImageGradientMatchesFiniteDifferences)
{
    nn::ParamStore store;
    CounterRng rng(3, 0);
    StemConfig cfg;
    Stem stem(store, "stem", 1, cfg, rng);
    Tensor img = random_tensor({1, 1, 64, 64}, rng, true, 0, 1);
    const auto r = check_gradient([&] { return ad::mean(stem.forward(img)); }, {img}, 10, 5);
    EXPECT_EQ(r.checked, 10u);
    EXPECT_LT(r.max_rel, 1e-4);
}

TEST(Trunk, OutputShapeAndDeterminism)
{
    StemConfig scfg;
    TrunkConfig tcfg;
    for (std::size_t in : {1, 3}) {
        nn::ParamStore a, b;
        CounterRng ra(4, 0), rb(4, 0);
        Stem sa(a, "stem", in, scfg, ra);
        Trunk ta(a, "trunk", scfg, tcfg, ra);
        Stem sb(b, "stem", in, scfg, rb);
        Trunk tb(b, "trunk", scfg, tcfg, rb);
        CounterRng xr(5, in);
        const auto img = random_tensor({2, in, 64, 64}, xr, false, 0, 1);
        const auto fa = ta.forward(sa.forward(img));
        EXPECT_EQ(fa.shape(), (Shape{2, 32, 16, 16}));
        EXPECT_EQ(values(fa), values(tb.forward(sb.forward(img))));
    }
}

TEST(Trunk, LowResolutionBranchIsCoupled)
{
    nn::ParamStore store;
    CounterRng rng(6, 0);
    StemConfig scfg;
    Trunk trunk(store, "trunk", scfg, TrunkConfig{}, rng);
    const auto tap = random_tensor({1, 16, 16, 16}, rng);
    const auto before = values(trunk.forward(tap));
    std::size_t zeroed = 0;
    for (auto &[name, t] : store.all())
        if (name.find(".low") != std::string::npos && name.find("weight") != std::string::npos) {
            for (auto &v : const_cast<Tensor &>(t).mutable_data()) v = 0.0;
            ++zeroed;
        }
    EXPECT_GT(zeroed, 0u);
    const auto after = values(trunk.forward(tap));
    double diff = 0.0;
    for (std::size_t i = 0; i < after.size(); ++i) diff = std::max(diff, std::abs(after[i] - before[i]));
    EXPECT_GT(diff, 1e-6);
    EXPECT_THROW(trunk.forward(random_tensor({1, 8, 16, 16}, rng)), ad::ShapeError);
}

TEST(Trunk, ParameterBudget)
{
    nn::ParamStore store;
    CounterRng rng(7, 0);
    StemConfig scfg;
    Trunk trunk(store, "trunk", scfg, TrunkConfig{}, rng);
    EXPECT_LT(store.scalar_count("trunk"), 500000u);
    EXPECT_GT(store.scalar_count("trunk"), 0u);
}

TEST(Freeze, StemStaysPutWhileTrunkTrains)
{
    nn::ParamStore store;
    CounterRng rng(8, 0);
    StemConfig scfg;
    Stem stem(store, "stem", 1, scfg, rng);
    Trunk trunk(store, "trunk", scfg, TrunkConfig{}, rng);
    nn::Optimizer opt;
    const auto img = random_tensor({2, 1, 64, 64}, rng, false, 0, 1);
    auto step = [&] {
        store.zero_grad();
        ad::backward(weighted_sum(trunk.forward(stem.forward(img)), 9));
        opt.step(store, 1e-3);
    };
    auto snapshot = [&](const std::string &prefix) {
        std::vector<std::vector<double>> v;
        for (const auto &t : with_prefix(store, prefix)) v.push_back(values(t));
        return v;
    };

    // Gradients reach the stem end to end.
    store.zero_grad();
    ad::backward(weighted_sum(trunk.forward(stem.forward(img)), 9));
    double stem_grad = 0.0;
    for (const auto &t : with_prefix(store, "stem"))
        for (double g : t.grad()) stem_grad += std::abs(g);
    EXPECT_GT(stem_grad, 0.0);

    store.freeze("stem");
    const auto stem0 = snapshot("stem"), trunk0 = snapshot("trunk");
    for (int i = 0; i < 5; ++i) step();
    EXPECT_EQ(snapshot("stem"), stem0);
    EXPECT_NE(snapshot("trunk"), trunk0);

    store.unfreeze("stem");
    step();
    EXPECT_NE(snapshot("stem"), stem0);
}

// ---------------------------------------------------------------- mcvae

TEST(Mcvae, ZeroNoiseGivesTheMean)
{
    nn::ParamStore store;
    CounterRng rng(10, 0);
    StemConfig scfg;
    Mcvae vae(store, "vae", scfg, McvaeConfig{}, rng);
    const auto x = random_tensor({3, 16, 16, 16}, rng);
    for (auto m : {Modality::m1, Modality::m2}) {
        const auto code = vae.encode(x, m, nullptr);
        EXPECT_EQ(code.z.shape(), (Shape{3, 64}));
        EXPECT_EQ(values(code.z), values(code.mu));
    }
    CounterRng a(11, 0), b(11, 0);
    EXPECT_EQ(values(vae.encode(x, Modality::m1, &a).z), values(vae.encode(x, Modality::m1, &b).z));
    EXPECT_THROW(vae.encode(random_tensor({3, 16, 8, 8}, rng), Modality::m1, nullptr), ad::ShapeError);
}

TEST(Mcvae, EncoderGradientMatchesFiniteDifferences)
{
    nn::ParamStore store;
    CounterRng rng(12, 0);
    Mcvae vae(store, "vae", StemConfig{}, McvaeConfig{}, rng);
    const auto x = random_tensor({2, 16, 16, 16}, rng);
    const auto eps = standard_normal({2, 64}, rng);
    for (auto [m, prefix] : {std::pair{Modality::m1, "vae.enc1"}, std::pair{Modality::m2, "vae.enc2"}}) {
        const auto leaves = with_prefix(store, prefix);
        const auto r = check_gradient([&] { return ad::sum(vae.encode(x, m, eps).z); }, leaves, 40, 13);
        EXPECT_GE(r.checked, 40u);
        EXPECT_LT(r.max_rel, 1e-4) << prefix;
    }
}

TEST(Mcvae, DecoderRangeShapeAndGradient)
{
    nn::ParamStore store;
    CounterRng rng(14, 0);
    Mcvae vae(store, "vae", StemConfig{}, McvaeConfig{}, rng);
    for (int i = 0; i < 100; ++i) {
        auto z = standard_normal({1, 64}, rng);
        for (auto &v : z.mutable_data()) v *= 3.0;
        const auto x = vae.decode(z);
        ASSERT_EQ(x.shape(), (Shape{1, 16, 16, 16}));
        for (double v : x.data()) ASSERT_TRUE(v > 0.0 && v < 1.0);
    }
    // Far past sigmoid saturation.
    auto big = standard_normal({4, 64}, rng);
    for (auto &v : big.mutable_data()) v *= 1e4;
    for (double v : vae.decode(big).data()) ASSERT_TRUE(v > 0.0 && v < 1.0);
    const auto z = standard_normal({2, 64}, rng);
    const auto r = check_gradient([&] { return weighted_sum(vae.decode(z), 15); }, with_prefix(store, "vae.dec"), 40, 16);
    EXPECT_GE(r.checked, 40u);
    EXPECT_LT(r.max_rel, 1e-4);
    EXPECT_THROW(vae.decode(standard_normal({2, 63}, rng)), ad::ShapeError);
}

TEST(Mcvae, ReparameterizationIsIdentityInMu)
{
    CounterRng rng(17, 0);
    Tensor mu = random_tensor({2, 5}, rng, true);
    Tensor lv = random_tensor({2, 5}, rng, true);
    const auto eps = standard_normal({2, 5}, rng);
    for (std::size_t k = 0; k < 10; ++k) {
        mu.zero_grad();
        const auto z = ad::reparameterize(mu, lv, eps);
        const std::size_t i = k;
        ad::backward(ad::sum(ad::mul(z, Tensor::from({2, 5}, [&] {
                                         std::vector<double> e(10, 0.0);
                                         e[i] = 1.0;
                                         return e;
                                     }()))));
        for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(mu.grad()[j], j == i ? 1.0 : 0.0);
    }
}

TEST(Mcvae, MixtureSelectsEachExpertHalfTheTime)
{
    nn::ParamStore store;
    CounterRng rng(18, 0);
    const auto scfg = small_tap();
    Mcvae vae(store, "vae", scfg, small_vae(), rng);
    const auto x1 = random_tensor({1000, 2, 8, 8}, rng);
    const auto x2 = random_tensor({1000, 2, 8, 8}, rng);
    std::size_t first = 0;
    for (int call = 0; call < 10; ++call) {
        const auto code = vae.sample_joint_posterior(x1, x2, rng);
        ASSERT_EQ(code.from_m2.size(), 1000u);
        for (bool b : code.from_m2) first += !b;
    }
    EXPECT_NEAR(double(first), 5000.0, 150.0);
}

TEST(Mcvae, FrozenChoicesAndNoiseAreDeterministic)
{
    nn::ParamStore store;
    CounterRng rng(19, 0);
    Mcvae vae(store, "vae", small_tap(), small_vae(), rng);
    const auto x1 = random_tensor({6, 2, 8, 8}, rng);
    const auto x2 = random_tensor({6, 2, 8, 8}, rng);
    const std::vector<bool> pick = {true, false, false, true, true, false};
    const auto eps = standard_normal({6, 4}, rng);
    const auto a = vae.sample_joint_posterior(x1, x2, pick, eps);
    const auto b = vae.sample_joint_posterior(x1, x2, pick, eps);
    EXPECT_EQ(values(a.z), values(b.z));
    // Each row is drawn from the expert it names.
    const auto q1 = vae.encode(x1, Modality::m1, eps);
    const auto q2 = vae.encode(x2, Modality::m2, eps);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(a.z[i * 4 + d], (pick[i] ? q2 : q1).z[i * 4 + d]);
}

TEST(Mcvae, CoincidingExpertsGiveTheSingleGaussianDensity)
{
    nn::ParamStore store;
    CounterRng rng(20, 0);
    const auto cfg = small_vae();
    Mcvae vae(store, "vae", small_tap(), cfg, rng);
    for (auto &[name, t] : store.all())
        if (name.rfind("vae.enc2.", 0) == 0) {
            const auto &src = store.at("vae.enc1." + name.substr(9));
            std::copy(src.data().begin(), src.data().end(), const_cast<Tensor &>(t).mutable_data().begin());
        }
    const auto one = random_tensor({1, 2, 8, 8}, rng);
    const auto q = vae.encode(one, Modality::m1, nullptr);
    const auto mu = values(q.mu), lv = values(q.logvar);
    const std::size_t D = cfg.latent_dim;

    // Expected log-density of a Gaussian under itself: -0.5 * sum(log 2 pi + logvar + 1).
    double closed = 0.0;
    for (std::size_t d = 0; d < D; ++d) closed += -0.5 * (std::log(2.0 * std::numbers::pi) + lv[d] + 1.0);

    std::vector<double> rep;
    for (int i = 0; i < 1000; ++i) rep.insert(rep.end(), one.data().begin(), one.data().end());
    const auto x = Tensor::from({1000, 2, 8, 8}, rep);
    double mc = 0.0;
    std::size_t n = 0;
    for (int call = 0; call < 10; ++call) {
        const auto code = vae.sample_joint_posterior(x, x, rng);
        const auto z = values(code.z);
        for (std::size_t i = 0; i < 1000; ++i, ++n) {
            std::span<const double> zi(z.data() + i * D, D);
            const double mix = mixture_log_density(zi, mu, lv, mu, lv, cfg.alpha);
            double single = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                const double e = zi[d] - mu[d];
                single += -0.5 * (std::log(2.0 * std::numbers::pi) + lv[d] + e * e / std::exp(lv[d]));
            }
            ASSERT_NEAR(mix, single, 1e-10);
            mc += mix;
        }
    }
    mc /= double(n);
    EXPECT_NEAR(mc, closed, 0.02 * std::abs(closed));
}

TEST(Mcvae, KlHandValues)
{
    const auto zero = Tensor::zeros({1, 7});
    EXPECT_EQ(kl_to_standard_normal(zero, zero).item(), 0.0);
    const auto kl = kl_to_standard_normal(Tensor::full({1, 2}, 1.0), Tensor::zeros({1, 2}));
    EXPECT_DOUBLE_EQ(kl.item(), 1.0);
}

TEST(Mcvae, KlMatchesMonteCarlo)
{
    CounterRng rng(21, 0);
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t D = 6;
        const auto mu = random_tensor({1, D}, rng, false, -1.5, 1.5);
        const auto lv = random_tensor({1, D}, rng, false, -1.0, 1.0);
        const double closed = kl_to_standard_normal(mu, lv).item();
        double mc = 0.0;
        const int n = 50000;
        for (int s = 0; s < n; ++s) {
            double lq = 0.0, lp = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                const double sd = std::exp(0.5 * lv[d]);
                const double e = rng.normal();
                const double z = mu[d] + sd * e;
                lq += -0.5 * (lv[d] + e * e);
                lp += -0.5 * z * z;
            }
            mc += lq - lp;
        }
        mc /= n;
        EXPECT_NEAR(mc, closed, 0.02 * closed) << "trial " << trial;
    }
}

TEST(Mcvae, ElboRejectsNegativeBeta)
{
    nn::ParamStore store;
    CounterRng rng(22, 0);
    Mcvae vae(store, "vae", small_tap(), small_vae(), rng);
    const auto x = random_tensor({2, 2, 8, 8}, rng);
    const auto code = vae.sample_joint_posterior(x, x, rng);
    EXPECT_THROW(vae.elbo_loss(ad::sigmoid(x), code, -0.1), std::invalid_argument);
    const auto e = vae.elbo_loss(ad::sigmoid(x), code, 0.5);
    EXPECT_NEAR(e.loss.item(), e.recon_nll.item() + 0.5 * e.kl.item(), 1e-12);
}

TEST(Mcvae, ReconLossHandValues)
{
    CounterRng rng(23, 0);
    const auto x = random_tensor({2, 16, 16, 16}, rng, false, 0, 0.5);
    EXPECT_EQ(recon_loss(x, x).item(), 0.0);
    const auto shifted = ad::add_scalar(x, 0.5);
    EXPECT_NEAR(recon_loss(shifted, x).item(), 32.0, 1e-9);
    EXPECT_THROW(recon_loss(x, random_tensor({2, 16, 16, 8}, rng)), ad::ShapeError);

    Tensor xhat = random_tensor({2, 16, 16, 16}, rng, true, 0, 1);
    const auto target = random_tensor({2, 16, 16, 16}, rng, false, 0, 1);
    const auto r = check_gradient([&] { return recon_loss(xhat, target); }, {xhat}, 30, 24);
    EXPECT_LT(r.max_rel, 1e-4);
}

TEST(Mcvae, AveragingDrawsShrinksVariance)
{
    nn::ParamStore store;
    CounterRng rng(25, 0);
    Mcvae vae(store, "vae", StemConfig{}, McvaeConfig{}, rng);
    const auto x1 = random_tensor({1, 16, 16, 16}, rng);
    auto variance = [&](std::size_t draws) {
        std::vector<std::vector<double>> reps;
        for (std::uint64_t r = 0; r < 20; ++r) {
            CounterRng g(100 + r, draws);
            reps.push_back(values(vae.reconstruct_conditional(x1, g, draws)));
        }
        double total = 0.0;
        for (std::size_t i = 0; i < reps[0].size(); ++i) {
            double m = 0.0, s = 0.0;
            for (const auto &v : reps) m += v[i];
            m /= 20.0;
            for (const auto &v : reps) s += (v[i] - m) * (v[i] - m);
            total += s / 19.0;
        }
        return total / double(reps[0].size());
    };
    const double ratio = variance(32) / variance(1);
    EXPECT_GT(ratio * 32.0, 0.6);
    EXPECT_LT(ratio * 32.0, 1.6);

    CounterRng a(7, 7), b(7, 7);
    EXPECT_EQ(values(vae.reconstruct_conditional(x1, a)), values(vae.reconstruct_conditional(x1, b)));
}

TEST(Mcvae, ConditionalPathIgnoresSecondEncoder)
{
    nn::ParamStore store;
    CounterRng rng(26, 0);
    Mcvae vae(store, "vae", StemConfig{}, McvaeConfig{}, rng);
    const auto x1 = random_tensor({2, 16, 16, 16}, rng);
    CounterRng a(3, 3);
    const auto before = values(vae.reconstruct_conditional(x1, a, 4));
    for (auto &t : with_prefix(store, "vae.enc2"))
        for (auto &v : t.mutable_data()) v = v * -7.0 + 1.0;
    CounterRng b(3, 3);
    EXPECT_EQ(values(vae.reconstruct_conditional(x1, b, 4)), before);
}

// ---------------------------------------------------------------- fusion

TEST(Fusion, EndpointsAreExact)
{
    CounterRng rng(30, 0);
    const auto a = random_tensor({2, 32, 16, 16}, rng, false, -5, 5);
    const auto b = random_tensor({2, 32, 16, 16}, rng, false, -5, 5);
    EXPECT_EQ(values(fuse_with_weights(a, b, Tensor::zeros(a.shape()))), values(a));
    EXPECT_EQ(values(fuse_with_weights(a, b, Tensor::full(a.shape(), 1.0))), values(b));
    const auto w = random_tensor(a.shape(), rng, false, 0, 1);
    EXPECT_EQ(values(fuse_with_weights(a, a, w)), values(a));
    EXPECT_THROW(fuse_with_weights(a, random_tensor({2, 32, 8, 8}, rng), w), ad::ShapeError);
}

TEST(Fusion, ConvexAndWeightsInUnitInterval)
{
    nn::ParamStore store;
    CounterRng rng(31, 0);
    AttentionFusion fusion(store, "fusion", 32, 4, rng);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_tensor({2, 32, 16, 16}, rng, false, -100, 100);
        const auto b = random_tensor({2, 32, 16, 16}, rng, false, -100, 100);
        const auto r = fusion.fuse(a, b);
        for (std::size_t i = 0; i < a.numel(); ++i) {
            ASSERT_GE(r.weights[i], 0.0);
            ASSERT_LE(r.weights[i], 1.0);
            ASSERT_GE(r.fused[i], std::min(a[i], b[i]));
            ASSERT_LE(r.fused[i], std::max(a[i], b[i]));
        }
    }
    // Arbitrary weights too.
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_tensor({1000}, rng, false, -1e3, 1e3);
        const auto b = random_tensor({1000}, rng, false, -1e-3, 1e3);
        const auto w = random_tensor({1000}, rng, false, 0, 1);
        const auto f = fuse_with_weights(a, b, w);
        for (std::size_t i = 0; i < 1000; ++i) {
            ASSERT_GE(f[i], std::min(a[i], b[i]));
            ASSERT_LE(f[i], std::max(a[i], b[i]));
        }
    }
}

TEST(Fusion, GradientReachesBothStreams)
{
    nn::ParamStore store;
    CounterRng rng(32, 0);
    AttentionFusion fusion(store, "fusion", 32, 4, rng);
    Tensor a = random_tensor({1, 32, 4, 4}, rng, true);
    Tensor b = random_tensor({1, 32, 4, 4}, rng, true);
    ad::backward(weighted_sum(fusion.fuse(a, b).fused, 3));
    double ga = 0.0, gb = 0.0;
    for (double g : a.grad()) ga += std::abs(g);
    for (double g : b.grad()) gb += std::abs(g);
    EXPECT_GT(ga, 0.0);
    EXPECT_GT(gb, 0.0);

    auto leaves = all_params(store);
    leaves.push_back(a);
    leaves.push_back(b);
    const auto r = check_gradient([&] { return weighted_sum(fusion.fuse(a, b).fused, 3); }, leaves, 40, 33);
    EXPECT_LT(r.max_rel, 1e-4);
}

TEST(Fusion, Utilization)
{
    const std::vector<Tensor> half = {Tensor::full({2, 3}, 0.5), Tensor::full({4}, 0.5)};
    EXPECT_DOUBLE_EQ(utilization(half), 0.5);
    const std::vector<Tensor> pair = {Tensor::full({8}, 0.2), Tensor::full({8}, 0.8)};
    EXPECT_DOUBLE_EQ(utilization(pair), 0.5);
    // Pooled over elements, not per map.
    const std::vector<Tensor> uneven = {Tensor::full({1}, 0.0), Tensor::full({3}, 1.0)};
    EXPECT_DOUBLE_EQ(utilization(uneven), 0.75);
    EXPECT_THROW(utilization(std::vector<Tensor>{}), std::invalid_argument);
    UtilizationMeter m;
    EXPECT_TRUE(m.empty());
    EXPECT_THROW(m.value(), std::invalid_argument);
}
