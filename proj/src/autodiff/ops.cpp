#include "mcvae/autodiff/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <utility>

namespace mcvae::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

constexpr std::uint64_t kKinkSeed = 0xcbf29ce484222325ULL;
thread_local bool kink_probe_active = false;
thread_local std::uint64_t kink_hash = kKinkSeed;

void require_same(const Tensor &a, const Tensor &b, const char *op)
{
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

// Input i of a node, or nullptr when it does not take gradients.
std::vector<double> *grad_of(Node &self, std::size_t i)
{
    auto &in = *self.inputs[i];
    return in.requires_grad ? &in.grad_buffer() : nullptr;
}

template <class F>
Tensor unary(const char *op, const Tensor &x, F f, std::function<void(Node &)> bw)
{
    std::vector<double> out(x.numel());
    auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
    return make_result(op, x.shape(), std::move(out), {x}, std::move(bw));
}

} // namespace

Tensor add(const Tensor &a, const Tensor &b)
{
    require_same(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result("add", a.shape(), std::move(out), {a, b}, [](Node &self) {
        for (std::size_t k = 0; k < 2; ++k)
            if (auto *g = grad_of(self, k))
                for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    });
}

Tensor sub(const Tensor &a, const Tensor &b)
{
    require_same(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node &self) {
        if (auto *g = grad_of(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        if (auto *g = grad_of(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor &a, const Tensor &b)
{
    require_same(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node &self) {
        const auto &av = self.inputs[0]->value;
        const auto &bv = self.inputs[1]->value;
        if (auto *g = grad_of(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
        if (auto *g = grad_of(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    });
}

Tensor scale(const Tensor &a, double factor)
{
    return unary("scale", a, [factor](double v) { return v * factor; }, [factor](Node &self) {
        auto &g = *grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor add_scalar(const Tensor &a, double offset)
{
    return unary("add_scalar", a, [offset](double v) { return v + offset; }, [](Node &self) {
        auto &g = *grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor sigmoid(const Tensor &x)
{
    return unary(
        "sigmoid", x,
        [](double v) {
            // Split by sign so large |v| never overflows exp.
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](Node &self) {
            auto &g = *grad_of(self, 0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = self.value[i];
                g[i] += self.grad[i] * s * (1.0 - s);
            }
        });
}

Tensor relu(const Tensor &x)
{
    if (kink_probe_active)
        for (double v : x.data()) kink_hash = kink_hash * 0x100000001b3ULL ^ (v > 0.0 ? 0x9eULL : 0x37ULL);
    return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node &self) {
        auto &g = *grad_of(self, 0);
        const auto &in = self.inputs[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (in[i] > 0.0) g[i] += self.grad[i];
    });
}

Tensor exp(const Tensor &x)
{
    return unary("exp", x, [](double v) { return std::exp(v); }, [](Node &self) {
        auto &g = *grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
    });
}

Tensor log(const Tensor &x)
{
    for (double v : x.data())
        if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
    return unary("log", x, [](double v) { return std::log(v); }, [](Node &self) {
        auto &g = *grad_of(self, 0);
        const auto &in = self.inputs[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / in[i];
    });
}

Tensor sqrt(const Tensor &x)
{
    for (double v : x.data())
        if (v < 0.0) throw std::domain_error("sqrt: negative input");
    return unary("sqrt", x, [](double v) { return std::sqrt(v); }, [](Node &self) {
        auto &g = *grad_of(self, 0);
        // d sqrt(0) is taken as 0 (subgradient) so exact matches give zero grad.
        for (std::size_t i = 0; i < g.size(); ++i)
            if (self.value[i] > 0.0) g[i] += self.grad[i] * 0.5 / self.value[i];
    });
}

Tensor squared_difference(const Tensor &a, const Tensor &b)
{
    require_same(a, b, "squared_difference");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = a[i] - b[i];
        out[i] = d * d;
    }
    return make_result("squared_difference", a.shape(), std::move(out), {a, b}, [](Node &self) {
        const auto &av = self.inputs[0]->value;
        const auto &bv = self.inputs[1]->value;
        auto *ga = grad_of(self, 0);
        auto *gb = grad_of(self, 1);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double d = 2.0 * (av[i] - bv[i]) * self.grad[i];
            if (ga) (*ga)[i] += d;
            if (gb) (*gb)[i] -= d;
        }
    });
}

Tensor sum(const Tensor &x)
{
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_result("sum", {1}, {s}, {x}, [](Node &self) {
        auto &g = *grad_of(self, 0);
        for (auto &v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor &x)
{
    if (x.numel() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(x), 1.0 / double(x.numel()));
}

Tensor sum_rows(const Tensor &x)
{
    const std::size_t n = x.dim(0);
    const std::size_t per = x.numel() / n;
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < per; ++i) out[r] += x[r * per + i];
    return make_result("sum_rows", {n}, std::move(out), {x}, [per](Node &self) {
        auto &g = *grad_of(self, 0);
        for (std::size_t r = 0; r < self.grad.size(); ++r)
            for (std::size_t i = 0; i < per; ++i) g[r * per + i] += self.grad[r];
    });
}

Tensor reshape(const Tensor &x, Shape shape)
{
    if (numel(shape) != x.numel())
        throw ShapeError("reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node &self) {
        auto &g = *grad_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor> &parts, std::size_t axis)
{
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape shape = parts[0].shape();
    if (axis >= shape.size()) throw ShapeError("concat: axis out of range for " + to_string(shape));
    shape[axis] = 0;
    for (const auto &p : parts) {
        auto s = p.shape();
        if (s.size() != shape.size()) throw ShapeError("concat: rank mismatch " + to_string(s));
        for (std::size_t d = 0; d < s.size(); ++d)
            if (d != axis && s[d] != parts[0].shape()[d])
                throw ShapeError("concat: shape mismatch " + to_string(parts[0].shape()) + " vs " +
                                 to_string(s));
        shape[axis] += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];

    std::vector<std::size_t> widths;
    for (const auto &p : parts) widths.push_back(p.shape()[axis] * inner);
    const std::size_t row = shape[axis] * inner;

    std::vector<double> out(numel(shape));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto src = parts[k].data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(src.begin() + o * widths[k], widths[k], out.begin() + o * row + offset);
        offset += widths[k];
    }
    return make_result("concat", shape, std::move(out), parts, [widths, outer, row](Node &self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (auto *g = grad_of(self, k))
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < widths[k]; ++i)
                        (*g)[o * widths[k] + i] += self.grad[o * row + off + i];
            off += widths[k];
        }
    });
}

Tensor conv2d(const Tensor &input, const Tensor &kernel, const Tensor &bias, std::size_t stride,
              std::size_t padding)
{
    if (input.shape().size() != 4 || kernel.shape().size() != 4)
        throw ShapeError("conv2d: expected 4-d input and kernel, got " + to_string(input.shape()) +
                         " and " + to_string(kernel.shape()));
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t O = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != C)
        throw ShapeError("conv2d: input " + to_string(input.shape()) + " and kernel " +
                         to_string(kernel.shape()) + " disagree on channels");
    if (bias.defined() && bias.shape() != Shape{O})
        throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " for " + std::to_string(O) +
                         " output channels");
    const std::size_t ph = H + 2 * padding, pw = W + 2 * padding;
    if (ph < kh || pw < kw || (ph - kh) % stride != 0 || (pw - kw) % stride != 0)
        throw ShapeError("conv2d: input " + to_string(input.shape()) + " with kernel " +
                         to_string(kernel.shape()) + ", stride " + std::to_string(stride) +
                         ", padding " + std::to_string(padding) + " gives a non-integer output extent");
    const std::size_t Ho = (ph - kh) / stride + 1, Wo = (pw - kw) / stride + 1;
    const std::size_t K = C * kh * kw, P = Ho * Wo, NP = N * P;

    // im2col: cols(r, n*P + p), r = (c*kh + i)*kw + j
    auto cols = std::make_shared<std::vector<double>>(K * NP, 0.0);
    auto x = input.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) {
                double *dst = cols->data() + ((c * kh + i) * kw + j) * NP;
                for (std::size_t n = 0; n < N; ++n) {
                    const double *src = x.data() + (n * C + c) * H * W;
                    for (std::size_t yo = 0; yo < Ho; ++yo) {
                        const std::ptrdiff_t yi = std::ptrdiff_t(yo * stride + i) - std::ptrdiff_t(padding);
                        double *row = dst + n * P + yo * Wo;
                        if (yi < 0 || yi >= std::ptrdiff_t(H)) continue;
                        for (std::size_t xo = 0; xo < Wo; ++xo) {
                            const std::ptrdiff_t xi = std::ptrdiff_t(xo * stride + j) - std::ptrdiff_t(padding);
                            if (xi >= 0 && xi < std::ptrdiff_t(W)) row[xo] = src[yi * W + xi];
                        }
                    }
                }
            }

    RowMat prod = CMapMat(kernel.data().data(), O, K) * CMapMat(cols->data(), K, NP);
    std::vector<double> out(N * O * P);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o) {
            const double b = bias.defined() ? bias[o] : 0.0;
            const double *src = prod.data() + o * NP + n * P;
            double *dst = out.data() + (n * O + o) * P;
            for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + b;
        }

    std::vector<Tensor> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    const bool has_bias = bias.defined();
    return make_result(
        "conv2d", {N, O, Ho, Wo}, std::move(out), inputs,
        [=](Node &self) {
            RowMat g(O, NP);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t o = 0; o < O; ++o)
                    std::copy_n(self.grad.data() + (n * O + o) * P, P, g.data() + o * NP + n * P);
            if (auto *gk = grad_of(self, 1))
                MapMat(gk->data(), O, K).noalias() += g * CMapMat(cols->data(), K, NP).transpose();
            if (has_bias)
                if (auto *gb = grad_of(self, 2))
                    for (std::size_t o = 0; o < O; ++o) (*gb)[o] += g.row(o).sum();
            if (auto *gx = grad_of(self, 0)) {
                RowMat dcols = CMapMat(self.inputs[1]->value.data(), O, K).transpose() * g;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < kh; ++i)
                        for (std::size_t j = 0; j < kw; ++j) {
                            const double *src = dcols.data() + ((c * kh + i) * kw + j) * NP;
                            for (std::size_t n = 0; n < N; ++n) {
                                double *dst = gx->data() + (n * C + c) * H * W;
                                for (std::size_t yo = 0; yo < Ho; ++yo) {
                                    const std::ptrdiff_t yi =
                                        std::ptrdiff_t(yo * stride + i) - std::ptrdiff_t(padding);
                                    if (yi < 0 || yi >= std::ptrdiff_t(H)) continue;
                                    const double *row = src + n * P + yo * Wo;
                                    for (std::size_t xo = 0; xo < Wo; ++xo) {
                                        const std::ptrdiff_t xi =
                                            std::ptrdiff_t(xo * stride + j) - std::ptrdiff_t(padding);
                                        if (xi >= 0 && xi < std::ptrdiff_t(W)) dst[yi * W + xi] += row[xo];
                                    }
                                }
                            }
                        }
            }
        });
}

Tensor dense(const Tensor &input, const Tensor &weight, const Tensor &bias)
{
    if (input.shape().size() != 2 || weight.shape().size() != 2 || input.dim(1) != weight.dim(0))
        throw ShapeError("dense: input " + to_string(input.shape()) + " and weight " +
                         to_string(weight.shape()) + " do not compose");
    const std::size_t N = input.dim(0), F = input.dim(1), G = weight.dim(1);
    if (bias.defined() && bias.shape() != Shape{G})
        throw ShapeError("dense: bias " + to_string(bias.shape()) + " for output width " + std::to_string(G));
    std::vector<double> out(N * G);
    MapMat y(out.data(), N, G);
    y.noalias() = CMapMat(input.data().data(), N, F) * CMapMat(weight.data().data(), F, G);
    if (bias.defined())
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t g = 0; g < G; ++g) y(n, g) += bias[g];

    std::vector<Tensor> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    const bool has_bias = bias.defined();
    return make_result("dense", {N, G}, std::move(out), inputs, [=](Node &self) {
        CMapMat gy(self.grad.data(), N, G);
        if (auto *gx = grad_of(self, 0))
            MapMat(gx->data(), N, F).noalias() += gy * CMapMat(self.inputs[1]->value.data(), F, G).transpose();
        if (auto *gw = grad_of(self, 1))
            MapMat(gw->data(), F, G).noalias() += CMapMat(self.inputs[0]->value.data(), N, F).transpose() * gy;
        if (has_bias)
            if (auto *gb = grad_of(self, 2))
                for (std::size_t g = 0; g < G; ++g) (*gb)[g] += gy.col(g).sum();
    });
}

Tensor upsample_nearest(const Tensor &x, std::size_t factor)
{
    if (x.shape().size() != 4 || factor == 0) throw ShapeError("upsample_nearest: expected NCHW, got " + to_string(x.shape()));
    const std::size_t NC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = H * factor, Wo = W * factor;
    std::vector<double> out(NC * Ho * Wo);
    for (std::size_t c = 0; c < NC; ++c)
        for (std::size_t y = 0; y < Ho; ++y)
            for (std::size_t xx = 0; xx < Wo; ++xx)
                out[(c * Ho + y) * Wo + xx] = x[(c * H + y / factor) * W + xx / factor];
    return make_result("upsample_nearest", {x.dim(0), x.dim(1), Ho, Wo}, std::move(out), {x},
                       [=](Node &self) {
                           auto &g = *grad_of(self, 0);
                           for (std::size_t c = 0; c < NC; ++c)
                               for (std::size_t y = 0; y < Ho; ++y)
                                   for (std::size_t xx = 0; xx < Wo; ++xx)
                                       g[(c * H + y / factor) * W + xx / factor] +=
                                           self.grad[(c * Ho + y) * Wo + xx];
                       });
}

Tensor downsample_stride(const Tensor &x, std::size_t stride)
{
    if (x.shape().size() != 4 || stride == 0) throw ShapeError("downsample_stride: expected NCHW, got " + to_string(x.shape()));
    const std::size_t NC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
    std::vector<double> out(NC * Ho * Wo);
    for (std::size_t c = 0; c < NC; ++c)
        for (std::size_t y = 0; y < Ho; ++y)
            for (std::size_t xx = 0; xx < Wo; ++xx) out[(c * Ho + y) * Wo + xx] = x[(c * H + y * stride) * W + xx * stride];
    return make_result("downsample_stride", {x.dim(0), x.dim(1), Ho, Wo}, std::move(out), {x},
                       [=](Node &self) {
                           auto &g = *grad_of(self, 0);
                           for (std::size_t c = 0; c < NC; ++c)
                               for (std::size_t y = 0; y < Ho; ++y)
                                   for (std::size_t xx = 0; xx < Wo; ++xx)
                                       g[(c * H + y * stride) * W + xx * stride] += self.grad[(c * Ho + y) * Wo + xx];
                       });
}

Tensor reparameterize(const Tensor &mu, const Tensor &logvar, const Tensor &eps)
{
    require_same(mu, logvar, "reparameterize");
    require_same(mu, eps, "reparameterize");
    std::vector<double> out(mu.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
    return make_result("reparameterize", mu.shape(), std::move(out), {mu, logvar, eps}, [](Node &self) {
        const auto &lv = self.inputs[1]->value;
        const auto &e = self.inputs[2]->value;
        if (auto *g = grad_of(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        if (auto *g = grad_of(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i)
                (*g)[i] += self.grad[i] * 0.5 * std::exp(0.5 * lv[i]) * e[i];
        if (auto *g = grad_of(self, 2))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * std::exp(0.5 * lv[i]);
    });
}

Tensor convex_blend(const Tensor &a, const Tensor &b, const Tensor &w)
{
    require_same(a, b, "convex_blend");
    require_same(a, w, "convex_blend");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Anchor at the nearer endpoint; both forms equal (1-w)a + wb.
        const double d = b[i] - a[i];
        out[i] = w[i] <= 0.5 ? a[i] + w[i] * d : b[i] - (1.0 - w[i]) * d;
    }
    return make_result("convex_blend", a.shape(), std::move(out), {a, b, w}, [](Node &self) {
        const auto &av = self.inputs[0]->value;
        const auto &bv = self.inputs[1]->value;
        const auto &wv = self.inputs[2]->value;
        auto *ga = grad_of(self, 0);
        auto *gb = grad_of(self, 1);
        auto *gw = grad_of(self, 2);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double g = self.grad[i];
            if (ga) (*ga)[i] += g * (1.0 - wv[i]);
            if (gb) (*gb)[i] += g * wv[i];
            if (gw) (*gw)[i] += g * (bv[i] - av[i]);
        }
    });
}

Tensor select_rows(const Tensor &first, const Tensor &second, const std::vector<bool> &take_second)
{
    require_same(first, second, "select_rows");
    const std::size_t n = first.dim(0);
    if (take_second.size() != n)
        throw ShapeError("select_rows: " + std::to_string(take_second.size()) + " flags for " +
                         std::to_string(n) + " rows");
    const std::size_t per = first.numel() / n;
    std::vector<double> out(first.numel());
    for (std::size_t r = 0; r < n; ++r) {
        auto src = (take_second[r] ? second : first).data();
        std::copy_n(src.begin() + r * per, per, out.begin() + r * per);
    }
    return make_result("select_rows", first.shape(), std::move(out), {first, second},
                       [take_second, per](Node &self) {
                           for (std::size_t r = 0; r < take_second.size(); ++r)
                               if (auto *g = grad_of(self, take_second[r] ? 1 : 0))
                                   for (std::size_t i = 0; i < per; ++i) (*g)[r * per + i] += self.grad[r * per + i];
                       });
}

Tensor gather_rows(const Tensor &x, const std::vector<std::size_t> &index)
{
    const std::size_t n = x.dim(0);
    const std::size_t per = x.numel() / n;
    Shape shape = x.shape();
    shape[0] = index.size();
    std::vector<double> out(index.size() * per);
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] >= n) throw ShapeError("gather_rows: row " + std::to_string(index[r]) + " out of range");
        std::copy_n(x.data().begin() + index[r] * per, per, out.begin() + r * per);
    }
    return make_result("gather_rows", shape, std::move(out), {x}, [index, per](Node &self) {
        auto &g = *grad_of(self, 0);
        for (std::size_t r = 0; r < index.size(); ++r)
            for (std::size_t i = 0; i < per; ++i) g[index[r] * per + i] += self.grad[r * per + i];
    });
}

ReluKinkProbe::ReluKinkProbe()
{
    kink_probe_active = true;
    kink_hash = kKinkSeed;
}

ReluKinkProbe::~ReluKinkProbe() { kink_probe_active = false; }

std::uint64_t ReluKinkProbe::take()
{
    return std::exchange(kink_hash, kKinkSeed);
}

} // namespace mcvae::ad
