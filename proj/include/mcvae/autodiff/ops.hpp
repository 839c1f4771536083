#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcvae/autodiff/tensor.hpp"

// Differentiable operations. Elementwise binaries require identical shapes;
// there is no general broadcasting. Image tensors are NCHW.
namespace mcvae::ad {

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double factor);
Tensor add_scalar(const Tensor &a, double offset);

Tensor sigmoid(const Tensor &x);
Tensor relu(const Tensor &x);
Tensor exp(const Tensor &x);
Tensor log(const Tensor &x);
Tensor sqrt(const Tensor &x);

/// (a - b)^2 elementwise.
Tensor squared_difference(const Tensor &a, const Tensor &b);

/// Full reductions to shape [1].
Tensor sum(const Tensor &x);
Tensor mean(const Tensor &x);
/// Reduce every axis except the first: [N, ...] -> [N].
Tensor sum_rows(const Tensor &x);

Tensor reshape(const Tensor &x, Shape shape);
Tensor concat(const std::vector<Tensor> &parts, std::size_t axis);

/// Cross-correlation. input [N,C,H,W], kernel [O,C,kh,kw], optional bias [O].
Tensor conv2d(const Tensor &input, const Tensor &kernel, const Tensor &bias, std::size_t stride,
              std::size_t padding);
inline Tensor conv2d(const Tensor &input, const Tensor &kernel, std::size_t stride, std::size_t padding)
{
    return conv2d(input, kernel, Tensor{}, stride, padding);
}

/// input [N,F] x weight [F,G] + bias [G].
Tensor dense(const Tensor &input, const Tensor &weight, const Tensor &bias);

/// Nearest-neighbour upsampling of the two trailing axes of an NCHW tensor.
Tensor upsample_nearest(const Tensor &x, std::size_t factor);
/// Keep every `stride`-th row and column of an NCHW tensor.
Tensor downsample_stride(const Tensor &x, std::size_t stride);

/// mu + exp(0.5 * logvar) * eps, with eps a constant of the same shape.
Tensor reparameterize(const Tensor &mu, const Tensor &logvar, const Tensor &eps);

/// (1 - w) * a + w * b, evaluated so that w = 0 yields a and w = 1 yields b
/// bit-exactly, and a == b yields a for any w.
Tensor convex_blend(const Tensor &a, const Tensor &b, const Tensor &w);

/// Row-wise selection along the leading axis: row n comes from `second` when
/// take_second[n], otherwise from `first`.
Tensor select_rows(const Tensor &first, const Tensor &second, const std::vector<bool> &take_second);

/// Rows `index` of the leading axis, in order.
Tensor gather_rows(const Tensor &x, const std::vector<std::size_t> &index);

/// Sign pattern of every relu evaluated on this thread while a probe is alive
/// is folded into a running hash. Finite-difference checks use it to reject
/// perturbations that cross a relu kink.
class ReluKinkProbe {
public:
    ReluKinkProbe();
    ~ReluKinkProbe();
    ReluKinkProbe(const ReluKinkProbe &) = delete;
    ReluKinkProbe &operator=(const ReluKinkProbe &) = delete;

    std::uint64_t take();
};

} // namespace mcvae::ad
