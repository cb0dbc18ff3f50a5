// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// Spatial and elementwise operators. Each op comes in two flavours: a plain
// tensor kernel, and a tape-recording overload taking Var arguments whose
// backward is the exact adjoint of the kernel.
//
// All kernels compute each batch item independently with a fixed reduction
// order, so results for one sample never depend on the batch it is part of.

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "smoothsal/tape.hpp"
#include "smoothsal/tensor.hpp"

namespace smoothsal {

// Cyclic spatial shift: out[..., i, j] = in[..., (i - dh) mod H, (j - dw) mod W].
struct RollOffset {
  int dh = 0;
  int dw = 0;

  RollOffset operator-() const { return {-dh, -dw}; }
  friend auto operator<=>(const RollOffset&, const RollOffset&) = default;
};

struct Conv2dGeometry {
  int stride = 1;
  int padding = 0;
};

std::int64_t conv_output_extent(std::int64_t in, std::int64_t kernel, int stride, int padding);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;   // empty unless requested
  Tensor<T> weight;  // empty unless requested
  Tensor<T> bias;    // empty unless requested and has_bias
};

// ---------------------------------------------------------------------------
// Tensor kernels
// ---------------------------------------------------------------------------

// Cross-correlation (no kernel flip). input N x C x H x W, weight O x C x kh x kw.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 Conv2dGeometry geom);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_output, const Tensor<T>& input,
                               const Tensor<T>& weight, bool has_bias, Conv2dGeometry geom,
                               bool need_input = true, bool need_weight = true);

template <typename T>
Tensor<T> roll2d(const Tensor<T>& t, RollOffset offset);

// Factor-2 bilinear reduction with half-pixel centres; with scale exactly 2
// this is the mean of each 2x2 block. Odd extents are rejected.
template <typename T>
Tensor<T> bilinear_down2x(const Tensor<T>& t);

// Half-pixel-centre bilinear resize of the trailing two axes.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& t, std::int64_t out_h, std::int64_t out_w);

std::vector<double> gaussian_kernel1d(int size, double sigma);

// Separable Gaussian with reflect padding over the trailing two axes.
template <typename T>
Tensor<T> gaussian_blur2d(const Tensor<T>& t, int kernel_size, double sigma);

template <typename T>
Tensor<T> softmax(const Tensor<T>& t);  // over the last axis
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& t);
template <typename T>
Tensor<T> relu(const Tensor<T>& t);

// ---------------------------------------------------------------------------
// Tape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, std::optional<Var<T>> bias, Conv2dGeometry geom);

// ReLU with subgradient 0 at 0.
template <typename T>
Var<T> relu(Var<T> x);

// ReLU whose backward multiplier is the rescale-rule secant
// (relu(x) - relu(ref)) / (x - ref), falling back to the local derivative
// where |x - ref| <= 1e-7. `reference` must have x's shape.
template <typename T>
Var<T> rescale_relu(Var<T> x, const Tensor<T>& reference);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> x, T factor);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> abs(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);
template <typename T>
Var<T> softmax(Var<T> x);

template <typename T>
Var<T> sum(Var<T> x);   // -> shape {1}
template <typename T>
Var<T> mean(Var<T> x);  // -> shape {1}

// x: N x F, weight: O x F, bias: O.
template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, std::optional<Var<T>> bias);

// N x C x H x W -> N x C.
template <typename T>
Var<T> global_average_pool(Var<T> x);

// 2x2 window, stride 2; ties route the gradient to the first maximum.
template <typename T>
Var<T> max_pool_2x(Var<T> x);

template <typename T>
Var<T> bilinear_down2x(Var<T> x);

template <typename T>
Var<T> bilinear_upsample(Var<T> x, std::int64_t out_h, std::int64_t out_w);

template <typename T>
Var<T> gaussian_blur2d(Var<T> x, int kernel_size, double sigma);

template <typename T>
Var<T> roll2d(Var<T> x, RollOffset offset);

// Per-channel y = x * scale[c] + shift[c] for N x C x ... inputs.
template <typename T>
Var<T> channel_affine(Var<T> x, Var<T> scale, Var<T> shift);

// Per-channel batch statistics; `var` is the unbiased estimate.
template <typename T>
struct BatchStats {
  Tensor<T> mean;
  Tensor<T> var;
};

// Training-time batch normalization over every axis except 1, followed by
// y = xhat * gamma[c] + beta[c]. Needs more than one value per channel.
template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps, BatchStats<T>* stats = nullptr);

// out[n] = x[n, index[n]] for x of shape N x K.
template <typename T>
Var<T> pick(Var<T> x, std::span<const std::int64_t> index);

// Mean softmax cross-entropy over the batch; logits N x K.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::int64_t> labels);

// Mean binary cross-entropy on single-logit heads; logits N x 1, labels in {0, 1}.
template <typename T>
Var<T> bce_with_logits(Var<T> logits, std::span<const std::int64_t> labels);

// Mean absolute error against a constant target.
template <typename T>
Var<T> l1_loss(Var<T> prediction, const Tensor<T>& target);

}  // namespace smoothsal
