// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "smoothsal/denoise.hpp"

namespace smoothsal {

enum class SaliencyMethod { grad, ig, deeplift, gradcam };
std::string_view to_string(SaliencyMethod m);
SaliencyMethod saliency_method_from_string(std::string_view name);

enum class ChannelReduction { mean_abs, mean, sum };
std::string_view to_string(ChannelReduction r);
ChannelReduction channel_reduction_from_string(std::string_view name);

struct SmoothGradConfig {
  int n = 20;
  double sigma = 0.2;
  std::uint64_t seed = 0;  // seed of this map's noise; see smoothgrad_seed
};

// Per-sample SmoothGrad seed: stream "smoothgrad/<sample>" of the root seed.
std::uint64_t smoothgrad_seed(std::uint64_t root, std::int64_t sample);

struct AttributionRequest {
  SaliencyMethod method = SaliencyMethod::grad;
  std::string layer{kInputLayer};  // gradcam: kInputLayer or the last spatial layer
  std::int64_t target = 0;
  int ig_steps = 32;
  std::optional<SmoothGradConfig> smoothgrad;
  ChannelReduction reduction = ChannelReduction::mean_abs;
};

nlohmann::json to_json(const AttributionRequest& req);

template <typename T>
struct SaliencyMap {
  std::string layer;  // resolved layer id
  Tensor<T> raw;       // C x h x w at the layer's resolution
  Tensor<T> reduced;   // h x w
  Tensor<T> rendered;  // H x W at input resolution
};

// Differentiable evaluation of the target logits' sum with respect to a
// layer's activation. `batch` is N x C x H x W; targets has N entries.
template <typename T>
struct LayerGradient {
  Tensor<T> activation;
  Tensor<T> grad;  // zeros when the logits do not depend on the layer
  Tensor<T> logits;
};

template <typename T>
LayerGradient<T> gradient_at(const ModelView<T>& view, const Tensor<T>& batch, std::string_view layer,
                             std::span<const std::int64_t> targets, ForwardOptions<T> options = {});

// The black baseline: zeros in normalized space, shaped like one input (1 x C x H x W).
template <typename T>
Tensor<T> black_baseline(const ModelGraph<T>& model);

// Raw attribution (C x h x w) of one image (C x H x W or 1 x C x H x W),
// without SmoothGrad or rendering.
template <typename T>
Tensor<T> attribute_raw(const ModelView<T>& view, const Tensor<T>& image, const AttributionRequest& req,
                        const Tensor<T>& baseline);

// Full attribution: SmoothGrad average of raw maps if requested, then
// channel reduction and bilinear rendering at input resolution.
template <typename T>
SaliencyMap<T> attribute(const ModelView<T>& view, const Tensor<T>& image, const AttributionRequest& req);

template <typename T>
SaliencyMap<T> attribute(const ModelView<T>& view, const Tensor<T>& image, const AttributionRequest& req,
                         const Tensor<T>& baseline);

template <typename T>
Tensor<T> reduce_channels(const Tensor<T>& raw, ChannelReduction mode);

template <typename T>
Tensor<T> upscale_map(const Tensor<T>& reduced, std::int64_t height, std::int64_t width);

// Resolves request layer ids, mapping gradcam's default to the last spatial layer.
template <typename T>
std::string attribution_layer(const ModelGraph<T>& model, const AttributionRequest& req);

}  // namespace smoothsal
