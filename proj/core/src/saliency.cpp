// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "smoothsal/errors.hpp"

namespace smoothsal {

std::string_view to_string(SaliencyMethod m) {
  switch (m) {
    case SaliencyMethod::grad:
      return "grad";
    case SaliencyMethod::ig:
      return "ig";
    case SaliencyMethod::deeplift:
      return "deeplift";
    case SaliencyMethod::gradcam:
      return "gradcam";
  }
  return "grad";
}

SaliencyMethod saliency_method_from_string(std::string_view name) {
  if (name == "grad") return SaliencyMethod::grad;
  if (name == "ig") return SaliencyMethod::ig;
  if (name == "deeplift") return SaliencyMethod::deeplift;
  if (name == "gradcam") return SaliencyMethod::gradcam;
  throw ConfigError("unknown saliency method '" + std::string(name) + "'");
}

std::string_view to_string(ChannelReduction r) {
  switch (r) {
    case ChannelReduction::mean_abs:
      return "mean_abs";
    case ChannelReduction::mean:
      return "mean";
    case ChannelReduction::sum:
      return "sum";
  }
  return "mean_abs";
}

ChannelReduction channel_reduction_from_string(std::string_view name) {
  if (name == "mean_abs") return ChannelReduction::mean_abs;
  if (name == "mean") return ChannelReduction::mean;
  if (name == "sum") return ChannelReduction::sum;
  throw ConfigError("unknown channel reduction '" + std::string(name) + "'");
}

std::uint64_t smoothgrad_seed(std::uint64_t root, std::int64_t sample) {
  return stream_seed(root, "smoothgrad/" + std::to_string(sample));
}

nlohmann::json to_json(const AttributionRequest& req) {
  nlohmann::json j{{"method", std::string(to_string(req.method))},
                   {"layer", req.layer},
                   {"target", req.target},
                   {"ig_steps", req.ig_steps},
                   {"reduction", std::string(to_string(req.reduction))}};
  if (req.smoothgrad) {
    j["smoothgrad"] = {{"n", req.smoothgrad->n}, {"sigma", req.smoothgrad->sigma}};
  } else {
    j["smoothgrad"] = nullptr;
  }
  return j;
}

template <typename T>
LayerGradient<T> gradient_at(const ModelView<T>& view, const Tensor<T>& batch, std::string_view layer,
                             std::span<const std::int64_t> targets, ForwardOptions<T> options) {
  const std::string id(layer);
  options.capture.push_back(id);
  Tape<T> tape;
  auto res = view.forward(tape, batch, options);
  const Var<T> act = res.captured.at(id);
  tape.backward(sum(pick(res.logits, targets)));
  LayerGradient<T> out;
  out.activation = act.value();
  out.grad = tape.has_grad(act) ? tape.grad(act) : Tensor<T>(act.shape());
  out.logits = res.logits.value();
  return out;
}

template <typename T>
Tensor<T> black_baseline(const ModelGraph<T>& model) {
  return Tensor<T>({1, model.input.channels, model.input.height, model.input.width});
}

template <typename T>
std::string attribution_layer(const ModelGraph<T>& model, const AttributionRequest& req) {
  if (req.method == SaliencyMethod::gradcam) {
    const std::string last = model.last_spatial_layer();
    if (req.layer.empty() || req.layer == kInputLayer) return last;
    if (model.resolve(req.layer) != last) {
      throw UsageError("gradcam is only defined at the last convolutional layer ('" + last + "')");
    }
    return last;
  }
  if (req.layer.empty() || req.layer == kInputLayer) return std::string(kInputLayer);
  return model.layers[model.index_of(req.layer)].id;
}

namespace {

template <typename T>
Tensor<T> as_batch(const Tensor<T>& image) {
  if (image.rank() == 3) return image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  if (image.rank() == 4 && image.dim(0) == 1) return image;
  throw DimensionError("attribution expects one image, got " + shape_string(image.shape()));
}

// Drops the leading batch axis of a 1 x ... tensor.
template <typename T>
Tensor<T> unbatch(const Tensor<T>& t) {
  return t.reshaped(Shape(t.shape().begin() + 1, t.shape().end()));
}

template <typename T>
Tensor<T> times_difference(const Tensor<T>& grad, const Tensor<T>& a, const Tensor<T>& a0) {
  Tensor<T> out(grad.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = (a[i] - a0[i]) * grad[i];
  return out;
}

template <typename T>
Tensor<T> activation_at(const ModelView<T>& view, const Tensor<T>& batch, const std::string& layer) {
  if (layer == kInputLayer) return batch;
  Tape<T> tape;
  ForwardOptions<T> o;
  o.capture = {layer};
  return view.forward(tape, batch, o).captured.at(layer).value();
}

template <typename T>
Tensor<T> integrated_gradients(const ModelView<T>& view, const Tensor<T>& x, const std::string& layer,
                               std::int64_t target, int steps, const Tensor<T>& baseline) {
  if (steps < 1) throw ConfigError("ig_steps must be at least 1");
  const Tensor<T> a = activation_at(view, x, layer);
  const Tensor<T> a0 = activation_at(view, baseline, layer);
  const std::int64_t per = a.numel();
  Tensor<T> total(a.shape());
  constexpr int kChunk = 32;
  for (int first = 1; first <= steps; first += kChunk) {
    const int count = std::min(kChunk, steps - first + 1);
    Shape s = a.shape();
    s[0] = count;
    Tensor<T> path(s);
    for (int k = 0; k < count; ++k) {
      const T alpha = static_cast<T>(first + k) / static_cast<T>(steps);
      for (std::int64_t i = 0; i < per; ++i) path[k * per + i] = a0[i] + alpha * (a[i] - a0[i]);
    }
    const std::vector<std::int64_t> targets(static_cast<std::size_t>(count), target);
    LayerGradient<T> g;
    if (layer == kInputLayer) {
      g = gradient_at(view, path, layer, targets);
    } else {
      std::vector<Tensor<T>> reps(static_cast<std::size_t>(count), x);
      ForwardOptions<T> o;
      o.inject[layer] = std::move(path);
      g = gradient_at(view, concat_batch(std::span<const Tensor<T>>(reps)), layer, targets, o);
    }
    for (int k = 0; k < count; ++k) {
      for (std::int64_t i = 0; i < per; ++i) total[i] += g.grad[k * per + i];
    }
  }
  const T inv = T(1) / static_cast<T>(steps);
  for (auto& v : total.data()) v *= inv;
  return times_difference(total, a, a0);
}

template <typename T>
Tensor<T> deeplift_rescale(const ModelView<T>& view, const Tensor<T>& x, const std::string& layer,
                           std::int64_t target, const Tensor<T>& baseline) {
  Tape<T> tape;
  ForwardOptions<T> ob;
  ob.record_relu_inputs = true;
  ob.capture = {layer};
  auto ref = view.forward(tape, baseline, ob);
  const Tensor<T> a0 = ref.captured.at(layer).value();

  ForwardOptions<T> oi;
  oi.relu_reference = &ref.relu_inputs;
  const std::int64_t targets[] = {target};
  const LayerGradient<T> g = gradient_at(view, x, layer, targets, oi);
  return times_difference(g.grad, g.activation, a0);
}

template <typename T>
Tensor<T> gradcam(const ModelView<T>& view, const Tensor<T>& x, const std::string& layer, std::int64_t target) {
  const std::int64_t targets[] = {target};
  const LayerGradient<T> g = gradient_at(view, x, layer, targets);
  const std::int64_t k = g.activation.dim(1);
  const std::int64_t h = g.activation.dim(2);
  const std::int64_t w = g.activation.dim(3);
  const std::int64_t plane = h * w;
  Tensor<T> cam({1, h, w});
  for (std::int64_t c = 0; c < k; ++c) {
    T alpha = 0;
    for (std::int64_t p = 0; p < plane; ++p) alpha += g.grad[c * plane + p];
    alpha /= static_cast<T>(plane);
    for (std::int64_t p = 0; p < plane; ++p) cam[p] += alpha * g.activation[c * plane + p];
  }
  for (auto& v : cam.data()) v = std::max(v, T(0));
  return cam;
}

}  // namespace

template <typename T>
Tensor<T> attribute_raw(const ModelView<T>& view, const Tensor<T>& image, const AttributionRequest& req,
                        const Tensor<T>& baseline) {
  const auto& model = view.graph();
  const Tensor<T> x = as_batch(image);
  const Tensor<T> b = as_batch(baseline);
  require_same_shape(x.shape(), b.shape(), "attribution baseline");
  const std::int64_t limit = model.classes == 1 ? 1 : model.classes;
  if (req.target < 0 || req.target >= limit) {
    throw UsageError("target " + std::to_string(req.target) + " is not a valid logit index");
  }
  const std::string layer = attribution_layer(model, req);
  switch (req.method) {
    case SaliencyMethod::grad: {
      const std::int64_t targets[] = {req.target};
      return unbatch(gradient_at(view, x, layer, targets).grad);
    }
    case SaliencyMethod::ig:
      return unbatch(integrated_gradients(view, x, layer, req.target, req.ig_steps, b));
    case SaliencyMethod::deeplift:
      return unbatch(deeplift_rescale(view, x, layer, req.target, b));
    case SaliencyMethod::gradcam:
      return gradcam(view, x, layer, req.target);
  }
  throw UsageError("unhandled saliency method");
}

template <typename T>
Tensor<T> reduce_channels(const Tensor<T>& raw, ChannelReduction mode) {
  if (raw.rank() != 3) throw DimensionError("reduce_channels expects C x h x w, got " + shape_string(raw.shape()));
  const std::int64_t c = raw.dim(0);
  const std::int64_t plane = raw.dim(1) * raw.dim(2);
  Tensor<T> out({raw.dim(1), raw.dim(2)});
  for (std::int64_t k = 0; k < c; ++k) {
    for (std::int64_t p = 0; p < plane; ++p) {
      const T v = raw[k * plane + p];
      out[p] += mode == ChannelReduction::mean_abs ? std::abs(v) : v;
    }
  }
  if (mode != ChannelReduction::sum) {
    for (auto& v : out.data()) v /= static_cast<T>(c);
  }
  return out;
}

template <typename T>
Tensor<T> upscale_map(const Tensor<T>& reduced, std::int64_t height, std::int64_t width) {
  return bilinear_upsample(reduced, height, width);
}

template <typename T>
SaliencyMap<T> attribute(const ModelView<T>& view, const Tensor<T>& image, const AttributionRequest& req,
                         const Tensor<T>& baseline) {
  SaliencyMap<T> out;
  out.layer = attribution_layer(view.graph(), req);
  if (!req.smoothgrad) {
    out.raw = attribute_raw(view, image, req, baseline);
  } else {
    const auto& sg = *req.smoothgrad;
    if (sg.n < 1) throw ConfigError("SmoothGrad needs n >= 1");
    if (!(sg.sigma >= 0.0)) throw ConfigError("SmoothGrad sigma must be non-negative");
    Rng rng(sg.seed);
    std::normal_distribution<double> noise(0.0, sg.sigma);
    for (int i = 0; i < sg.n; ++i) {
      Tensor<T> noisy = image;
      if (sg.sigma > 0.0) {
        for (auto& v : noisy.data()) v += static_cast<T>(noise(rng));
      }
      Tensor<T> raw = attribute_raw(view, noisy, req, baseline);
      if (i == 0) {
        out.raw = std::move(raw);
      } else {
        add_into(out.raw, raw);
      }
    }
    if (sg.n > 1) {
      const T inv = T(1) / static_cast<T>(sg.n);
      for (auto& v : out.raw.data()) v *= inv;
    }
  }
  out.reduced = reduce_channels(out.raw, req.reduction);
  const auto& in = view.graph().input;
  out.rendered = upscale_map(out.reduced, in.height, in.width);
  return out;
}

template <typename T>
SaliencyMap<T> attribute(const ModelView<T>& view, const Tensor<T>& image, const AttributionRequest& req) {
  return attribute(view, image, req, black_baseline(view.graph()));
}

#define SMOOTHSAL_SALIENCY_INSTANTIATE(T)                                                           \
  template LayerGradient<T> gradient_at<T>(const ModelView<T>&, const Tensor<T>&, std::string_view, \
                                           std::span<const std::int64_t>, ForwardOptions<T>);       \
  template Tensor<T> black_baseline<T>(const ModelGraph<T>&);                                      \
  template std::string attribution_layer<T>(const ModelGraph<T>&, const AttributionRequest&);      \
  template Tensor<T> attribute_raw<T>(const ModelView<T>&, const Tensor<T>&,                       \
                                      const AttributionRequest&, const Tensor<T>&);                \
  template Tensor<T> reduce_channels<T>(const Tensor<T>&, ChannelReduction);                       \
  template Tensor<T> upscale_map<T>(const Tensor<T>&, std::int64_t, std::int64_t);                 \
  template SaliencyMap<T> attribute<T>(const ModelView<T>&, const Tensor<T>&,                      \
                                       const AttributionRequest&, const Tensor<T>&);               \
  template SaliencyMap<T> attribute<T>(const ModelView<T>&, const Tensor<T>&, const AttributionRequest&);

SMOOTHSAL_SALIENCY_INSTANTIATE(float)
SMOOTHSAL_SALIENCY_INSTANTIATE(double)

}  // namespace smoothsal
