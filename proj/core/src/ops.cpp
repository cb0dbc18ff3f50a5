// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <string>

#include "smoothsal/errors.hpp"
#include "smoothsal/ops.hpp"

namespace smoothsal {

namespace {

template <typename T>
using Ctx = typename Tape<T>::Context;

std::int64_t wrap(std::int64_t i, std::int64_t n) {
  const std::int64_t r = i % n;
  return r < 0 ? r + n : r;
}

// Reflect without repeating the edge sample: -1 -> 1, n -> n - 2.
std::int64_t reflect(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i = wrap(i, period);
  return i < n ? i : period - i;
}

struct Plane {
  std::int64_t outer, h, w;
};

Plane plane_of(const Shape& s, const char* op) {
  if (s.size() < 2) throw DimensionError(std::string(op) + ": needs at least 2 spatial axes");
  const std::int64_t h = s[s.size() - 2];
  const std::int64_t w = s[s.size() - 1];
  return {shape_numel(s) / (h * w), h, w};
}

template <typename T, typename F>
Tensor<T> map_values(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  return out;
}

// One-axis linear filter along `axis_len`-long rows (stride `step`), used for
// the separable blur and bilinear resize. taps[o] lists (source index, weight).
struct Taps {
  std::vector<std::vector<std::pair<std::int64_t, double>>> rows;
};

template <typename T>
Tensor<T> apply_taps(const Tensor<T>& x, const Taps& taps, bool vertical, std::int64_t out_len) {
  const Plane p = plane_of(x.shape(), "filter");
  Shape s = x.shape();
  const std::int64_t oh = vertical ? out_len : p.h;
  const std::int64_t ow = vertical ? p.w : out_len;
  s[s.size() - 2] = oh;
  s[s.size() - 1] = ow;
  Tensor<T> out(s);
  for (std::int64_t b = 0; b < p.outer; ++b) {
    const T* src = x.data().data() + b * p.h * p.w;
    T* dst = out.data().data() + b * oh * ow;
    if (vertical) {
      for (std::int64_t i = 0; i < oh; ++i) {
        for (const auto& [k, wgt] : taps.rows[static_cast<std::size_t>(i)]) {
          const T wk = static_cast<T>(wgt);
          for (std::int64_t j = 0; j < ow; ++j) dst[i * ow + j] += wk * src[k * p.w + j];
        }
      }
    } else {
      for (std::int64_t i = 0; i < oh; ++i) {
        for (std::int64_t j = 0; j < ow; ++j) {
          T acc = 0;
          for (const auto& [k, wgt] : taps.rows[static_cast<std::size_t>(j)]) {
            acc += static_cast<T>(wgt) * src[i * p.w + k];
          }
          dst[i * ow + j] = acc;
        }
      }
    }
  }
  return out;
}

// Adjoint of apply_taps: scatter grad back to the input extent `in_len`.
template <typename T>
Tensor<T> apply_taps_adjoint(const Tensor<T>& g, const Taps& taps, bool vertical,
                             std::int64_t in_len) {
  const Plane p = plane_of(g.shape(), "filter adjoint");
  Shape s = g.shape();
  const std::int64_t ih = vertical ? in_len : p.h;
  const std::int64_t iw = vertical ? p.w : in_len;
  s[s.size() - 2] = ih;
  s[s.size() - 1] = iw;
  Tensor<T> out(s);
  for (std::int64_t b = 0; b < p.outer; ++b) {
    const T* src = g.data().data() + b * p.h * p.w;
    T* dst = out.data().data() + b * ih * iw;
    if (vertical) {
      for (std::int64_t i = 0; i < p.h; ++i) {
        for (const auto& [k, wgt] : taps.rows[static_cast<std::size_t>(i)]) {
          const T wk = static_cast<T>(wgt);
          for (std::int64_t j = 0; j < p.w; ++j) dst[k * iw + j] += wk * src[i * p.w + j];
        }
      }
    } else {
      for (std::int64_t i = 0; i < p.h; ++i) {
        for (std::int64_t j = 0; j < p.w; ++j) {
          for (const auto& [k, wgt] : taps.rows[static_cast<std::size_t>(j)]) {
            dst[i * iw + k] += static_cast<T>(wgt) * src[i * p.w + j];
          }
        }
      }
    }
  }
  return out;
}

Taps blur_taps(std::int64_t n, const std::vector<double>& kernel) {
  const auto r = static_cast<std::int64_t>(kernel.size() / 2);
  if (r >= n && n > 1) {
    throw DimensionError("gaussian_blur2d: reflect padding " + std::to_string(r) +
                         " needs an extent larger than the radius, got " + std::to_string(n));
  }
  Taps t;
  t.rows.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(kernel.size()); ++k) {
      t.rows[static_cast<std::size_t>(i)].push_back(
          {reflect(i + k - r, n), kernel[static_cast<std::size_t>(k)]});
    }
  }
  return t;
}

Taps resize_taps(std::int64_t in, std::int64_t out) {
  Taps t;
  t.rows.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    const auto i0 = std::min(static_cast<std::int64_t>(std::floor(src)), in - 1);
    const std::int64_t i1 = std::min(i0 + 1, in - 1);
    const double l1 = src - static_cast<double>(i0);
    auto& row = t.rows[static_cast<std::size_t>(o)];
    row.push_back({i0, 1.0 - l1});
    if (l1 > 0) row.push_back({i1, l1});
  }
  return t;
}

void check_even_plane(const Shape& s, const char* op) {
  const Plane p = plane_of(s, op);
  if (p.h % 2 != 0 || p.w % 2 != 0) {
    throw DimensionError(std::string(op) + ": spatial extents must be even, got " +
                         shape_string(s));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor kernels
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> roll2d(const Tensor<T>& t, RollOffset offset) {
  const Plane p = plane_of(t.shape(), "roll2d");
  Tensor<T> out(t.shape());
  for (std::int64_t b = 0; b < p.outer; ++b) {
    const T* src = t.data().data() + b * p.h * p.w;
    T* dst = out.data().data() + b * p.h * p.w;
    for (std::int64_t i = 0; i < p.h; ++i) {
      const std::int64_t si = wrap(i - offset.dh, p.h);
      for (std::int64_t j = 0; j < p.w; ++j) {
        dst[i * p.w + j] = src[si * p.w + wrap(j - offset.dw, p.w)];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_down2x(const Tensor<T>& t) {
  check_even_plane(t.shape(), "bilinear_down2x");
  const Plane p = plane_of(t.shape(), "bilinear_down2x");
  Shape s = t.shape();
  s[s.size() - 2] /= 2;
  s[s.size() - 1] /= 2;
  Tensor<T> out(s);
  const std::int64_t oh = p.h / 2, ow = p.w / 2;
  for (std::int64_t b = 0; b < p.outer; ++b) {
    const T* src = t.data().data() + b * p.h * p.w;
    T* dst = out.data().data() + b * oh * ow;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        const T* r0 = src + (2 * i) * p.w + 2 * j;
        const T* r1 = r0 + p.w;
        dst[i * ow + j] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& t, std::int64_t out_h, std::int64_t out_w) {
  const Plane p = plane_of(t.shape(), "bilinear_upsample");
  if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_upsample: bad target size");
  const Tensor<T> rows = apply_taps(t, resize_taps(p.h, out_h), true, out_h);
  return apply_taps(rows, resize_taps(p.w, out_w), false, out_w);
}

std::vector<double> gaussian_kernel1d(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ConfigError("gaussian kernel size must be odd and >= 1");
  if (sigma <= 0) throw ConfigError("gaussian sigma must be positive");
  std::vector<double> k(static_cast<std::size_t>(size));
  const double half = (size - 1) / 2.0;
  double total = 0;
  for (int i = 0; i < size; ++i) {
    const double x = (i - half) / sigma;
    k[static_cast<std::size_t>(i)] = std::exp(-0.5 * x * x);
    total += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= total;
  return k;
}

template <typename T>
Tensor<T> gaussian_blur2d(const Tensor<T>& t, int kernel_size, double sigma) {
  const Plane p = plane_of(t.shape(), "gaussian_blur2d");
  const auto k = gaussian_kernel1d(kernel_size, sigma);
  const Tensor<T> rows = apply_taps(t, blur_taps(p.h, k), true, p.h);
  return apply_taps(rows, blur_taps(p.w, k), false, p.w);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& t) {
  const std::int64_t k = t.dim(-1);
  Tensor<T> out(t.shape());
  for (std::int64_t r = 0; r < t.numel() / k; ++r) {
    const T* x = t.data().data() + r * k;
    T* y = out.data().data() + r * k;
    const T m = *std::max_element(x, x + k);
    T z = 0;
    for (std::int64_t i = 0; i < k; ++i) z += (y[i] = std::exp(x[i] - m));
    for (std::int64_t i = 0; i < k; ++i) y[i] /= z;
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& t) {
  return map_values(t, [](T v) {
    if (v >= 0) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& t) {
  return map_values(t, [](T v) { return v > 0 ? v : T(0); });
}

// ---------------------------------------------------------------------------
// Tape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> relu(Var<T> x) {
  return x.tape()->record(relu(x.value()), {x}, [](Ctx<T>& ctx) {
    const auto& in = ctx.input(0);
    Tensor<T> g = ctx.grad_output();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      if (!(in[i] > 0)) g[i] = 0;
    }
    ctx.accumulate(0, std::move(g));
  });
}

template <typename T>
Var<T> rescale_relu(Var<T> x, const Tensor<T>& reference) {
  require_same_shape(x.shape(), reference.shape(), "rescale_relu reference");
  return x.tape()->record(relu(x.value()), {x}, [reference](Ctx<T>& ctx) {
    const auto& in = ctx.input(0);
    Tensor<T> g = ctx.grad_output();
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const T dx = in[i] - reference[i];
      T m;
      if (std::abs(dx) > T(1e-7)) {
        const T fx = in[i] > 0 ? in[i] : T(0);
        const T fr = reference[i] > 0 ? reference[i] : T(0);
        m = (fx - fr) / dx;
      } else {
        m = in[i] > 0 ? T(1) : T(0);
      }
      g[i] *= m;
    }
    ctx.accumulate(0, std::move(g));
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  add_into(out, b.value());
  return a.tape()->record(std::move(out), {a, b}, [](Ctx<T>& ctx) {
    if (ctx.needs(0)) ctx.accumulate(0, ctx.grad_output());
    if (ctx.needs(1)) ctx.accumulate(1, ctx.grad_output());
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [](Ctx<T>& ctx) {
    if (ctx.needs(0)) ctx.accumulate(0, ctx.grad_output());
    if (ctx.needs(1)) ctx.accumulate(1, map_values(ctx.grad_output(), [](T v) { return -v; }));
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  return x.tape()->record(map_values(x.value(), [factor](T v) { return v * factor; }), {x},
                          [factor](Ctx<T>& ctx) {
                            ctx.accumulate(0, map_values(ctx.grad_output(),
                                                         [factor](T v) { return v * factor; }));
                          });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [](Ctx<T>& ctx) {
    const auto& g = ctx.grad_output();
    for (std::size_t k = 0; k < 2; ++k) {
      if (!ctx.needs(k)) continue;
      Tensor<T> gk = g;
      const auto& other = ctx.input(1 - k);
      for (std::int64_t i = 0; i < gk.numel(); ++i) gk[i] *= other[i];
      ctx.accumulate(k, std::move(gk));
    }
  });
}

template <typename T>
Var<T> abs(Var<T> x) {
  return x.tape()->record(map_values(x.value(), [](T v) { return std::abs(v); }), {x},
                          [](Ctx<T>& ctx) {
                            const auto& in = ctx.input(0);
                            Tensor<T> g = ctx.grad_output();
                            for (std::int64_t i = 0; i < g.numel(); ++i) {
                              g[i] *= in[i] > 0 ? T(1) : (in[i] < 0 ? T(-1) : T(0));
                            }
                            ctx.accumulate(0, std::move(g));
                          });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return x.tape()->record(sigmoid(x.value()), {x}, [](Ctx<T>& ctx) {
    const auto& y = ctx.output();
    Tensor<T> g = ctx.grad_output();
    for (std::int64_t i = 0; i < g.numel(); ++i) g[i] *= y[i] * (T(1) - y[i]);
    ctx.accumulate(0, std::move(g));
  });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  return x.tape()->record(softmax(x.value()), {x}, [](Ctx<T>& ctx) {
    const auto& y = ctx.output();
    const auto& g = ctx.grad_output();
    const std::int64_t k = y.dim(-1);
    Tensor<T> gx(y.shape());
    for (std::int64_t r = 0; r < y.numel() / k; ++r) {
      T s = 0;
      for (std::int64_t i = 0; i < k; ++i) s += g[r * k + i] * y[r * k + i];
      for (std::int64_t i = 0; i < k; ++i) gx[r * k + i] = y[r * k + i] * (g[r * k + i] - s);
    }
    ctx.accumulate(0, std::move(gx));
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  return x.tape()->record(Tensor<T>({1}, sum(x.value())), {x}, [](Ctx<T>& ctx) {
    ctx.accumulate(0, Tensor<T>::full(ctx.input(0).shape(), ctx.grad_output()[0]));
  });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const T n = static_cast<T>(x.value().numel());
  return x.tape()->record(Tensor<T>({1}, sum(x.value()) / n), {x}, [n](Ctx<T>& ctx) {
    ctx.accumulate(0, Tensor<T>::full(ctx.input(0).shape(), ctx.grad_output()[0] / n));
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, std::optional<Var<T>> bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw DimensionError("linear: input " + shape_string(xs) + " incompatible with weight " +
                         shape_string(ws));
  }
  const std::int64_t n = xs[0], f = xs[1], o = ws[0];
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != o)) {
    throw DimensionError("linear: bias shape mismatch");
  }
  Tensor<T> out({n, o});
  const auto& xv = x.value();
  const auto& wv = weight.value();
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < o; ++c) {
      T acc = bias ? bias->value()[c] : T(0);
      for (std::int64_t k = 0; k < f; ++k) acc += wv[c * f + k] * xv[r * f + k];
      out[r * o + c] = acc;
    }
  }
  std::vector<Var<T>> parents{x, weight};
  if (bias) parents.push_back(*bias);
  const bool has_bias = bias.has_value();
  return x.tape()->record(std::move(out), parents, [n, f, o, has_bias](Ctx<T>& ctx) {
    const auto& g = ctx.grad_output();
    const auto& xv = ctx.input(0);
    const auto& wv = ctx.input(1);
    if (ctx.needs(0)) {
      Tensor<T> gx({n, f});
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < o; ++c)
          for (std::int64_t k = 0; k < f; ++k) gx[r * f + k] += g[r * o + c] * wv[c * f + k];
      ctx.accumulate(0, std::move(gx));
    }
    if (ctx.needs(1)) {
      Tensor<T> gw({o, f});
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < o; ++c)
          for (std::int64_t k = 0; k < f; ++k) gw[c * f + k] += g[r * o + c] * xv[r * f + k];
      ctx.accumulate(1, std::move(gw));
    }
    if (has_bias && ctx.needs(2)) {
      Tensor<T> gb({o});
      for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t c = 0; c < o; ++c) gb[c] += g[r * o + c];
      ctx.accumulate(2, std::move(gb));
    }
  });
}

template <typename T>
Var<T> global_average_pool(Var<T> x) {
  const auto& s = x.shape();
  if (s.size() != 4) throw DimensionError("global_average_pool expects N x C x H x W");
  const std::int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor<T> out({n, c});
  const auto& xv = x.value();
  for (std::int64_t i = 0; i < n * c; ++i) {
    T acc = 0;
    for (std::int64_t p = 0; p < hw; ++p) acc += xv[i * hw + p];
    out[i] = acc / static_cast<T>(hw);
  }
  return x.tape()->record(std::move(out), {x}, [hw](Ctx<T>& ctx) {
    const auto& g = ctx.grad_output();
    Tensor<T> gx(ctx.input(0).shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const T v = g[i] / static_cast<T>(hw);
      for (std::int64_t p = 0; p < hw; ++p) gx[i * hw + p] = v;
    }
    ctx.accumulate(0, std::move(gx));
  });
}

template <typename T>
Var<T> max_pool_2x(Var<T> x) {
  check_even_plane(x.shape(), "max_pool_2x");
  const Plane p = plane_of(x.shape(), "max_pool_2x");
  Shape s = x.shape();
  s[s.size() - 2] /= 2;
  s[s.size() - 1] /= 2;
  const std::int64_t oh = p.h / 2, ow = p.w / 2;
  Tensor<T> out(s);
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
  const auto& xv = x.value();
  for (std::int64_t b = 0; b < p.outer; ++b) {
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        const std::int64_t base = b * p.h * p.w;
        std::int64_t best = base + 2 * i * p.w + 2 * j;
        for (std::int64_t di = 0; di < 2; ++di)
          for (std::int64_t dj = 0; dj < 2; ++dj) {
            const std::int64_t idx = base + (2 * i + di) * p.w + 2 * j + dj;
            if (xv[idx] > xv[best]) best = idx;
          }
        const std::int64_t o = (b * oh + i) * ow + j;
        out[o] = xv[best];
        argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return x.tape()->record(std::move(out), {x}, [argmax = std::move(argmax)](Ctx<T>& ctx) {
    const auto& g = ctx.grad_output();
    Tensor<T> gx(ctx.input(0).shape());
    for (std::int64_t o = 0; o < g.numel(); ++o) gx[argmax[static_cast<std::size_t>(o)]] += g[o];
    ctx.accumulate(0, std::move(gx));
  });
}

template <typename T>
Var<T> bilinear_down2x(Var<T> x) {
  return x.tape()->record(bilinear_down2x(x.value()), {x}, [](Ctx<T>& ctx) {
    const auto& g = ctx.grad_output();
    const Plane p = plane_of(ctx.input(0).shape(), "bilinear_down2x");
    Tensor<T> gx(ctx.input(0).shape());
    const std::int64_t oh = p.h / 2, ow = p.w / 2;
    for (std::int64_t b = 0; b < p.outer; ++b) {
      for (std::int64_t i = 0; i < oh; ++i) {
        for (std::int64_t j = 0; j < ow; ++j) {
          const T v = g[(b * oh + i) * ow + j] * T(0.25);
          T* r0 = gx.data().data() + b * p.h * p.w + (2 * i) * p.w + 2 * j;
          r0[0] = v;
          r0[1] = v;
          r0[p.w] = v;
          r0[p.w + 1] = v;
        }
      }
    }
    ctx.accumulate(0, std::move(gx));
  });
}

template <typename T>
Var<T> bilinear_upsample(Var<T> x, std::int64_t out_h, std::int64_t out_w) {
  const Plane p = plane_of(x.shape(), "bilinear_upsample");
  return x.tape()->record(bilinear_upsample(x.value(), out_h, out_w), {x},
                          [p, out_h, out_w](Ctx<T>& ctx) {
                            const Tensor<T> gw = apply_taps_adjoint(
                                ctx.grad_output(), resize_taps(p.w, out_w), false, p.w);
                            ctx.accumulate(0, apply_taps_adjoint(gw, resize_taps(p.h, out_h),
                                                                 true, p.h));
                          });
}

template <typename T>
Var<T> gaussian_blur2d(Var<T> x, int kernel_size, double sigma) {
  const Plane p = plane_of(x.shape(), "gaussian_blur2d");
  const auto k = gaussian_kernel1d(kernel_size, sigma);
  return x.tape()->record(gaussian_blur2d(x.value(), kernel_size, sigma), {x},
                          [p, k](Ctx<T>& ctx) {
                            const Tensor<T> gw = apply_taps_adjoint(
                                ctx.grad_output(), blur_taps(p.w, k), false, p.w);
                            ctx.accumulate(0, apply_taps_adjoint(gw, blur_taps(p.h, k), true, p.h));
                          });
}

template <typename T>
Var<T> roll2d(Var<T> x, RollOffset offset) {
  return x.tape()->record(roll2d(x.value(), offset), {x}, [offset](Ctx<T>& ctx) {
    ctx.accumulate(0, roll2d(ctx.grad_output(), -offset));
  });
}

template <typename T>
Var<T> channel_affine(Var<T> x, Var<T> scale_v, Var<T> shift_v) {
  const auto& s = x.shape();
  if (s.size() < 2) throw DimensionError("channel_affine expects N x C x ...");
  const std::int64_t n = s[0], c = s[1], inner = x.value().numel() / (n * c);
  require_same_shape(scale_v.shape(), Shape{c}, "channel_affine scale");
  require_same_shape(shift_v.shape(), Shape{c}, "channel_affine shift");
  Tensor<T> out(s);
  const auto& xv = x.value();
  const auto& a = scale_v.value();
  const auto& b = shift_v.value();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t p = 0; p < inner; ++p) {
        const std::int64_t idx = (i * c + ch) * inner + p;
        out[idx] = xv[idx] * a[ch] + b[ch];
      }
  return x.tape()->record(std::move(out), {x, scale_v, shift_v}, [n, c, inner](Ctx<T>& ctx) {
    const auto& g = ctx.grad_output();
    const auto& xv = ctx.input(0);
    const auto& a = ctx.input(1);
    if (ctx.needs(0)) {
      Tensor<T> gx(xv.shape());
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch)
          for (std::int64_t p = 0; p < inner; ++p) {
            const std::int64_t idx = (i * c + ch) * inner + p;
            gx[idx] = g[idx] * a[ch];
          }
      ctx.accumulate(0, std::move(gx));
    }
    if (ctx.needs(1) || ctx.needs(2)) {
      Tensor<T> ga({c}), gb({c});
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch)
          for (std::int64_t p = 0; p < inner; ++p) {
            const std::int64_t idx = (i * c + ch) * inner + p;
            ga[ch] += g[idx] * xv[idx];
            gb[ch] += g[idx];
          }
      if (ctx.needs(1)) ctx.accumulate(1, std::move(ga));
      if (ctx.needs(2)) ctx.accumulate(2, std::move(gb));
    }
  });
}

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps, BatchStats<T>* stats) {
  const auto& s = x.shape();
  if (s.size() < 2) throw DimensionError("batch_norm expects N x C x ...");
  const std::int64_t n = s[0], c = s[1], inner = x.value().numel() / (n * c);
  const std::int64_t count = n * inner;
  if (count < 2) throw DimensionError("batch_norm needs more than one value per channel");
  require_same_shape(gamma.shape(), Shape{c}, "batch_norm gamma");
  require_same_shape(beta.shape(), Shape{c}, "batch_norm beta");
  const auto& xv = x.value();
  Tensor<T> mean({c}), inv_std({c}), var_unbiased({c});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < inner; ++p) sum += xv[(i * c + ch) * inner + p];
    const double mu = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < inner; ++p) {
        const double d = xv[(i * c + ch) * inner + p] - mu;
        ss += d * d;
      }
    mean[ch] = static_cast<T>(mu);
    inv_std[ch] = static_cast<T>(1.0 / std::sqrt(ss / static_cast<double>(count) + eps));
    var_unbiased[ch] = static_cast<T>(ss / static_cast<double>(count - 1));
  }
  Tensor<T> xhat(s), out(s);
  const auto& g = gamma.value();
  const auto& b = beta.value();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t p = 0; p < inner; ++p) {
        const std::int64_t idx = (i * c + ch) * inner + p;
        xhat[idx] = (xv[idx] - mean[ch]) * inv_std[ch];
        out[idx] = xhat[idx] * g[ch] + b[ch];
      }
  if (stats) *stats = {mean, var_unbiased};
  return x.tape()->record(std::move(out), {x, gamma, beta},
                          [n, c, inner, count, xhat = std::move(xhat), inv_std = std::move(inv_std)](Ctx<T>& ctx) {
    const auto& go = ctx.grad_output();
    const auto& gm = ctx.input(1);
    Tensor<T> sum_g({c}), sum_gx({c});
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t p = 0; p < inner; ++p) {
          const std::int64_t idx = (i * c + ch) * inner + p;
          sum_g[ch] += go[idx];
          sum_gx[ch] += go[idx] * xhat[idx];
        }
    if (ctx.needs(0)) {
      Tensor<T> gx(xhat.shape());
      const T inv_count = T(1) / static_cast<T>(count);
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch)
          for (std::int64_t p = 0; p < inner; ++p) {
            const std::int64_t idx = (i * c + ch) * inner + p;
            gx[idx] = gm[ch] * inv_std[ch] *
                      (go[idx] - sum_g[ch] * inv_count - xhat[idx] * sum_gx[ch] * inv_count);
          }
      ctx.accumulate(0, std::move(gx));
    }
    if (ctx.needs(1)) ctx.accumulate(1, std::move(sum_gx));
    if (ctx.needs(2)) ctx.accumulate(2, std::move(sum_g));
  });
}

template <typename T>
Var<T> pick(Var<T> x, std::span<const std::int64_t> index) {
  const auto& s = x.shape();
  if (s.size() != 2 || static_cast<std::int64_t>(index.size()) != s[0]) {
    throw DimensionError("pick: expects N x K input and N indices");
  }
  const std::int64_t n = s[0], k = s[1];
  std::vector<std::int64_t> idx(index.begin(), index.end());
  Tensor<T> out({n});
  for (std::int64_t r = 0; r < n; ++r) {
    if (idx[static_cast<std::size_t>(r)] < 0 || idx[static_cast<std::size_t>(r)] >= k) {
      throw UsageError("pick: index out of range");
    }
    out[r] = x.value()[r * k + idx[static_cast<std::size_t>(r)]];
  }
  return x.tape()->record(std::move(out), {x}, [idx, k](Ctx<T>& ctx) {
    Tensor<T> gx(ctx.input(0).shape());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      gx[static_cast<std::int64_t>(r) * k + idx[r]] = ctx.grad_output()[static_cast<std::int64_t>(r)];
    }
    ctx.accumulate(0, std::move(gx));
  });
}

template <typename T>
Var<T> cross_entropy(Var<T> logits, std::span<const std::int64_t> labels) {
  const auto& s = logits.shape();
  if (s.size() != 2 || static_cast<std::int64_t>(labels.size()) != s[0]) {
    throw DimensionError("cross_entropy: expects N x K logits and N labels");
  }
  const std::int64_t n = s[0], k = s[1];
  std::vector<std::int64_t> y(labels.begin(), labels.end());
  Tensor<T> p = softmax(logits.value());
  T loss = 0;
  for (std::int64_t r = 0; r < n; ++r) {
    const auto label = y[static_cast<std::size_t>(r)];
    if (label < 0 || label >= k) throw UsageError("cross_entropy: label out of range");
    // log-sum-exp form for accuracy on confident predictions
    const T* z = logits.value().data().data() + r * k;
    const T m = *std::max_element(z, z + k);
    T acc = 0;
    for (std::int64_t i = 0; i < k; ++i) acc += std::exp(z[i] - m);
    loss += (m + std::log(acc)) - z[label];
  }
  loss /= static_cast<T>(n);
  return logits.tape()->record(Tensor<T>({1}, loss), {logits},
                               [p = std::move(p), y, n, k](Ctx<T>& ctx) {
                                 const T g = ctx.grad_output()[0] / static_cast<T>(n);
                                 Tensor<T> gx = p;
                                 for (std::int64_t r = 0; r < n; ++r) {
                                   gx[r * k + y[static_cast<std::size_t>(r)]] -= T(1);
                                 }
                                 for (auto& v : gx.data()) v *= g;
                                 ctx.accumulate(0, std::move(gx));
                               });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logits, std::span<const std::int64_t> labels) {
  const auto& s = logits.shape();
  if (s.size() != 2 || s[1] != 1 || static_cast<std::int64_t>(labels.size()) != s[0]) {
    throw DimensionError("bce_with_logits: expects N x 1 logits and N labels");
  }
  const std::int64_t n = s[0];
  std::vector<std::int64_t> y(labels.begin(), labels.end());
  T loss = 0;
  for (std::int64_t r = 0; r < n; ++r) {
    const T z = logits.value()[r];
    const T t = static_cast<T>(y[static_cast<std::size_t>(r)]);
    loss += std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<T>(n);
  return logits.tape()->record(Tensor<T>({1}, loss), {logits}, [y, n](Ctx<T>& ctx) {
    const T g = ctx.grad_output()[0] / static_cast<T>(n);
    const Tensor<T> p = sigmoid(ctx.input(0));
    Tensor<T> gx(p.shape());
    for (std::int64_t r = 0; r < n; ++r) {
      gx[r] = g * (p[r] - static_cast<T>(y[static_cast<std::size_t>(r)]));
    }
    ctx.accumulate(0, std::move(gx));
  });
}

template <typename T>
Var<T> l1_loss(Var<T> prediction, const Tensor<T>& target) {
  require_same_shape(prediction.shape(), target.shape(), "l1_loss");
  const auto& pv = prediction.value();
  T acc = 0;
  for (std::int64_t i = 0; i < pv.numel(); ++i) acc += std::abs(pv[i] - target[i]);
  const T n = static_cast<T>(pv.numel());
  return prediction.tape()->record(Tensor<T>({1}, acc / n), {prediction},
                                   [target, n](Ctx<T>& ctx) {
                                     const auto& pv = ctx.input(0);
                                     const T g = ctx.grad_output()[0] / n;
                                     Tensor<T> gx(pv.shape());
                                     for (std::int64_t i = 0; i < gx.numel(); ++i) {
                                       const T d = pv[i] - target[i];
                                       gx[i] = d > 0 ? g : (d < 0 ? -g : T(0));
                                     }
                                     ctx.accumulate(0, std::move(gx));
                                   });
}

#define SMOOTHSAL_OPS_INSTANTIATE(T)                                                         \
  template Tensor<T> roll2d<T>(const Tensor<T>&, RollOffset);                                \
  template Tensor<T> bilinear_down2x<T>(const Tensor<T>&);                                   \
  template Tensor<T> bilinear_upsample<T>(const Tensor<T>&, std::int64_t, std::int64_t);     \
  template Tensor<T> gaussian_blur2d<T>(const Tensor<T>&, int, double);                      \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                           \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                           \
  template Tensor<T> relu<T>(const Tensor<T>&);                                              \
  template Var<T> relu<T>(Var<T>);                                                           \
  template Var<T> rescale_relu<T>(Var<T>, const Tensor<T>&);                                 \
  template Var<T> add<T>(Var<T>, Var<T>);                                                    \
  template Var<T> sub<T>(Var<T>, Var<T>);                                                    \
  template Var<T> scale<T>(Var<T>, T);                                                       \
  template Var<T> mul<T>(Var<T>, Var<T>);                                                    \
  template Var<T> abs<T>(Var<T>);                                                            \
  template Var<T> sigmoid<T>(Var<T>);                                                        \
  template Var<T> softmax<T>(Var<T>);                                                        \
  template Var<T> sum<T>(Var<T>);                                                            \
  template Var<T> mean<T>(Var<T>);                                                           \
  template Var<T> linear<T>(Var<T>, Var<T>, std::optional<Var<T>>);                          \
  template Var<T> global_average_pool<T>(Var<T>);                                            \
  template Var<T> max_pool_2x<T>(Var<T>);                                                    \
  template Var<T> bilinear_down2x<T>(Var<T>);                                                \
  template Var<T> bilinear_upsample<T>(Var<T>, std::int64_t, std::int64_t);                  \
  template Var<T> gaussian_blur2d<T>(Var<T>, int, double);                                   \
  template Var<T> roll2d<T>(Var<T>, RollOffset);                                             \
  template Var<T> channel_affine<T>(Var<T>, Var<T>, Var<T>);                                 \
  template Var<T> batch_norm<T>(Var<T>, Var<T>, Var<T>, double, BatchStats<T>*);            \
  template Var<T> pick<T>(Var<T>, std::span<const std::int64_t>);                            \
  template Var<T> cross_entropy<T>(Var<T>, std::span<const std::int64_t>);                   \
  template Var<T> bce_with_logits<T>(Var<T>, std::span<const std::int64_t>);                 \
  template Var<T> l1_loss<T>(Var<T>, const Tensor<T>&);

SMOOTHSAL_OPS_INSTANTIATE(float)
SMOOTHSAL_OPS_INSTANTIATE(double)

}  // namespace smoothsal
