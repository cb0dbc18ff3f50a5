// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// im2col + GEMM convolution. One GEMM per batch item, so the reduction order
// for a given sample is fixed by the layer geometry alone.

#include <Eigen/Core>

#include "smoothsal/errors.hpp"
#include "smoothsal/ops.hpp"

namespace smoothsal {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvDims {
  std::int64_t n, c, h, w, o, kh, kw, ho, wo;
  int stride, pad;

  std::int64_t patch() const { return c * kh * kw; }
  std::int64_t out_pixels() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvDims conv_dims(const Shape& in, const Shape& wt, Conv2dGeometry g) {
  if (in.size() != 4 || wt.size() != 4) {
    throw DimensionError("conv2d expects 4-d input and weight, got " + shape_string(in) +
                         " and " + shape_string(wt));
  }
  if (in[1] != wt[1]) {
    throw DimensionError("conv2d: input has " + std::to_string(in[1]) +
                         " channels but weight expects " + std::to_string(wt[1]));
  }
  if (g.stride < 1 || g.padding < 0) throw DimensionError("conv2d: invalid stride or padding");
  ConvDims d{in[0], in[1], in[2], in[3], wt[0], wt[2], wt[3], 0, 0, g.stride, g.padding};
  d.ho = conv_output_extent(d.h, d.kh, g.stride, g.padding);
  d.wo = conv_output_extent(d.w, d.kw, g.stride, g.padding);
  return d;
}

template <typename T>
void im2col(const T* img, const ConvDims& d, T* col) {
  const std::int64_t hw = d.out_pixels();
  for (std::int64_t c = 0; c < d.c; ++c) {
    for (std::int64_t u = 0; u < d.kh; ++u) {
      for (std::int64_t v = 0; v < d.kw; ++v) {
        T* row = col + ((c * d.kh + u) * d.kw + v) * hw;
        for (std::int64_t i = 0; i < d.ho; ++i) {
          const std::int64_t y = i * d.stride - d.pad + u;
          T* dst = row + i * d.wo;
          if (y < 0 || y >= d.h) {
            std::fill(dst, dst + d.wo, T{0});
            continue;
          }
          const T* src = img + (c * d.h + y) * d.w;
          for (std::int64_t j = 0; j < d.wo; ++j) {
            const std::int64_t x = j * d.stride - d.pad + v;
            dst[j] = (x >= 0 && x < d.w) ? src[x] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patches back onto the image.
template <typename T>
void col2im(const T* col, const ConvDims& d, T* img) {
  const std::int64_t hw = d.out_pixels();
  for (std::int64_t c = 0; c < d.c; ++c) {
    for (std::int64_t u = 0; u < d.kh; ++u) {
      for (std::int64_t v = 0; v < d.kw; ++v) {
        const T* row = col + ((c * d.kh + u) * d.kw + v) * hw;
        for (std::int64_t i = 0; i < d.ho; ++i) {
          const std::int64_t y = i * d.stride - d.pad + u;
          if (y < 0 || y >= d.h) continue;
          T* dst = img + (c * d.h + y) * d.w;
          const T* src = row + i * d.wo;
          for (std::int64_t j = 0; j < d.wo; ++j) {
            const std::int64_t x = j * d.stride - d.pad + v;
            if (x >= 0 && x < d.w) dst[x] += src[j];
          }
        }
      }
    }
  }
}

}  // namespace

std::int64_t conv_output_extent(std::int64_t in, std::int64_t kernel, int stride, int padding) {
  if (in + 2 * padding < kernel) {
    throw DimensionError("conv2d: padded extent " + std::to_string(in + 2 * padding) +
                         " smaller than kernel " + std::to_string(kernel));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 Conv2dGeometry geom) {
  const ConvDims d = conv_dims(input.shape(), weight.shape(), geom);
  if (bias && (bias->rank() != 1 || bias->dim(0) != d.o)) {
    throw DimensionError("conv2d: bias shape " + shape_string(bias->shape()) +
                         " does not match " + std::to_string(d.o) + " output channels");
  }
  Tensor<T> out({d.n, d.o, d.ho, d.wo});
  const std::int64_t hw = d.out_pixels();
  const std::int64_t in_stride = d.c * d.h * d.w;
  ConstMapMat<T> wmat(weight.data().data(), d.o, d.patch());
  std::vector<T> col(d.pointwise() ? 0 : static_cast<std::size_t>(d.patch() * hw));
  for (std::int64_t n = 0; n < d.n; ++n) {
    const T* img = input.data().data() + n * in_stride;
    MapMat<T> omat(out.data().data() + n * d.o * hw, d.o, hw);
    if (d.pointwise()) {
      omat.noalias() = wmat * ConstMapMat<T>(img, d.c, hw);
    } else {
      im2col(img, d, col.data());
      omat.noalias() = wmat * ConstMapMat<T>(col.data(), d.patch(), hw);
    }
    if (bias) {
      for (std::int64_t o = 0; o < d.o; ++o) omat.row(o).array() += (*bias)[o];
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_output, const Tensor<T>& input,
                               const Tensor<T>& weight, bool has_bias, Conv2dGeometry geom,
                               bool need_input, bool need_weight) {
  const ConvDims d = conv_dims(input.shape(), weight.shape(), geom);
  require_same_shape(grad_output.shape(), Shape{d.n, d.o, d.ho, d.wo}, "conv2d_backward");
  Conv2dGrads<T> grads;
  const std::int64_t hw = d.out_pixels();
  const std::int64_t in_stride = d.c * d.h * d.w;
  ConstMapMat<T> wmat(weight.data().data(), d.o, d.patch());
  std::vector<T> col(d.pointwise() ? 0 : static_cast<std::size_t>(d.patch() * hw));

  if (need_input) {
    grads.input = Tensor<T>(input.shape());
    for (std::int64_t n = 0; n < d.n; ++n) {
      ConstMapMat<T> g(grad_output.data().data() + n * d.o * hw, d.o, hw);
      T* gx = grads.input.data().data() + n * in_stride;
      if (d.pointwise()) {
        MapMat<T>(gx, d.c, hw).noalias() = wmat.transpose() * g;
      } else {
        MapMat<T> gcol(col.data(), d.patch(), hw);
        gcol.noalias() = wmat.transpose() * g;
        col2im(col.data(), d, gx);
      }
    }
  }
  if (need_weight) {
    grads.weight = Tensor<T>(weight.shape());
    MapMat<T> gw(grads.weight.data().data(), d.o, d.patch());
    for (std::int64_t n = 0; n < d.n; ++n) {
      ConstMapMat<T> g(grad_output.data().data() + n * d.o * hw, d.o, hw);
      const T* img = input.data().data() + n * in_stride;
      if (d.pointwise()) {
        gw.noalias() += g * ConstMapMat<T>(img, d.c, hw).transpose();
      } else {
        im2col(img, d, col.data());
        gw.noalias() += g * ConstMapMat<T>(col.data(), d.patch(), hw).transpose();
      }
    }
  }
  if (need_weight && has_bias) {
    grads.bias = Tensor<T>({d.o});
    for (std::int64_t n = 0; n < d.n; ++n) {
      const T* g = grad_output.data().data() + n * d.o * hw;
      for (std::int64_t o = 0; o < d.o; ++o) {
        T s = 0;
        for (std::int64_t p = 0; p < hw; ++p) s += g[o * hw + p];
        grads.bias[o] += s;
      }
    }
  }
  return grads;
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, std::optional<Var<T>> bias, Conv2dGeometry geom) {
  Tape<T>* tape = input.tape();
  Tensor<T> out = conv2d(input.value(), weight.value(), bias ? &bias->value() : nullptr, geom);
  std::vector<Var<T>> parents{input, weight};
  if (bias) parents.push_back(*bias);
  const bool has_bias = bias.has_value();
  return tape->record(std::move(out), parents, [geom, has_bias](typename Tape<T>::Context& ctx) {
    const bool need_w = ctx.needs(1) || (has_bias && ctx.needs(2));
    auto g = conv2d_backward(ctx.grad_output(), ctx.input(0), ctx.input(1), has_bias, geom,
                             ctx.needs(0), need_w);
    if (ctx.needs(0)) ctx.accumulate(0, std::move(g.input));
    if (ctx.needs(1)) ctx.accumulate(1, std::move(g.weight));
    if (has_bias && ctx.needs(2)) ctx.accumulate(2, std::move(g.bias));
  });
}

#define SMOOTHSAL_CONV_INSTANTIATE(T)                                                         \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,          \
                               Conv2dGeometry);                                               \
  template Conv2dGrads<T> conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&,              \
                                             const Tensor<T>&, bool, Conv2dGeometry, bool,    \
                                             bool);                                           \
  template Var<T> conv2d<T>(Var<T>, Var<T>, std::optional<Var<T>>, Conv2dGeometry);

SMOOTHSAL_CONV_INSTANTIATE(float)
SMOOTHSAL_CONV_INSTANTIATE(double)

}  // namespace smoothsal
