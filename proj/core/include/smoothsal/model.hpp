// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothsal/ops.hpp"
#include "smoothsal/random.hpp"
#include "smoothsal/tape.hpp"
#include "smoothsal/tensor.hpp"

namespace smoothsal {

inline constexpr std::string_view kInputLayer = "input";
inline constexpr double kBatchNormEpsilon = 1e-5;

enum class LayerKind {
  conv,
  relu,
  residual_add,
  maxpool2x,
  avgpool2x,
  global_avg_pool,
  linear,
  frozen_batchnorm,
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::relu;
  std::vector<std::string> inputs;  // producer ids, or kInputLayer
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  bool bias = false;
  bool never_replace = false;  // set on the first downsampling conv

  bool is_downsampling_conv() const { return kind == LayerKind::conv && stride == 2; }
  bool has_params() const {
    return kind == LayerKind::conv || kind == LayerKind::linear ||
           kind == LayerKind::frozen_batchnorm;
  }
  std::vector<std::string> param_names() const;
};

nlohmann::json to_json(const LayerSpec& spec);
LayerSpec layer_from_json(const nlohmann::json& j);

struct InputSpec {
  int channels = 3;
  int height = 64;
  int width = 64;
};

enum class HeadKind { softmax, sigmoid };

inline std::string param_key(std::string_view layer, std::string_view param) {
  return std::string(layer) + "." + std::string(param);
}

/// Layer graph of an evaluation-mode classifier.
///
/// Layers are stored in topological order; the last layer produces the
/// N x classes logits. Parameters live in `params` keyed "<layer>.<param>".
/// Frozen batch norm is a stored per-channel affine; there is no batch state,
/// so two forwards on the same input are bit-identical.
template <typename T>
struct ModelGraph {
  InputSpec input;
  int classes = 2;
  std::vector<LayerSpec> layers;
  std::map<std::string, Tensor<T>> params;
  std::map<std::string, std::string> aliases;  // e.g. "stage1.out" -> "stage1.block2.out"
  nlohmann::json architecture = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();

  HeadKind head() const { return classes == 1 ? HeadKind::sigmoid : HeadKind::softmax; }
  std::string resolve(std::string_view id) const;  // follows aliases
  bool has_layer(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws UsageError
  const LayerSpec& layer(std::string_view id) const;
  const Tensor<T>& param(std::string_view layer, std::string_view name) const;
  Tensor<T>& param(std::string_view layer, std::string_view name);

  // Id of the last layer producing a spatial map (the Grad-CAM layer).
  std::string last_spatial_layer() const;
  // Per-sample output shape of a layer, C x h x w or F.
  Shape layer_shape(std::string_view id) const;

  void validate() const;

  template <typename U>
  ModelGraph<U> cast() const;
};

template <typename T>
template <typename U>
ModelGraph<U> ModelGraph<T>::cast() const {
  ModelGraph<U> out;
  out.input = input;
  out.classes = classes;
  out.layers = layers;
  out.aliases = aliases;
  out.architecture = architecture;
  out.metadata = metadata;
  for (const auto& [k, v] : params) out.params.emplace(k, v.template cast<U>());
  return out;
}

// Appends a layer and allocates default-initialized parameters.
template <typename T>
void add_layer(ModelGraph<T>& model, LayerSpec spec);

// Kaiming-uniform fan-in weights (bound sqrt(6 / fan_in)), zero biases,
// batch-norm scale 1 and shift 0.
template <typename T>
void initialize_layer(ModelGraph<T>& model, const LayerSpec& spec, Rng& rng);

template <typename T>
void initialize_all(ModelGraph<T>& model, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward evaluation
// ---------------------------------------------------------------------------

// Replaces a conv layer's computation. Returning nullopt keeps the plain conv.
template <typename T>
using ConvOverride = std::function<std::optional<Var<T>>(const LayerSpec&, Var<T> input,
                                                         Var<T> weight, std::optional<Var<T>> bias)>;

template <typename T>
struct ForwardOptions {
  // Layer ids (aliases allowed, kInputLayer allowed) whose activations are
  // returned as gradient-carrying tape nodes.
  std::vector<std::string> capture;
  // Activations to substitute for the named layers. Upstream layers that only
  // feed injected layers are not evaluated.
  std::map<std::string, Tensor<T>> inject;
  // Per-ReLU reference inputs for the rescale rule, keyed by relu layer id.
  const std::map<std::string, Tensor<T>>* relu_reference = nullptr;
  bool record_relu_inputs = false;
  bool params_require_grad = false;
  ConvOverride<T> conv_override;
  // Training only: frozen_batchnorm layers normalize with batch statistics,
  // treating scale/shift as gamma/beta, and record those statistics here.
  std::map<std::string, BatchStats<T>>* batch_statistics = nullptr;
};

template <typename T>
struct ForwardResult {
  Var<T> logits;
  std::map<std::string, Var<T>> captured;       // keyed by the requested id
  std::map<std::string, Var<T>> params;         // keyed "<layer>.<param>"
  std::map<std::string, Tensor<T>> relu_inputs;  // keyed by relu layer id
};

template <typename T>
ForwardResult<T> forward(const ModelGraph<T>& model, Tape<T>& tape, const Tensor<T>& batch,
                         const ForwardOptions<T>& options = {});

// Convenience: logits only, no gradients.
template <typename T>
Tensor<T> predict_logits(const ModelGraph<T>& model, const Tensor<T>& batch);

// Softmax (or sigmoid for single-logit heads) probabilities, N x classes.
template <typename T>
Tensor<T> probabilities(HeadKind head, const Tensor<T>& logits);

// ---------------------------------------------------------------------------
// Structure queries and edits
// ---------------------------------------------------------------------------

struct DownsamplingConvs {
  std::vector<std::string> all;       // forward order
  std::vector<std::string> eligible;  // all minus the never-replaced first one
};

template <typename T>
DownsamplingConvs list_downsampling_convs(const ModelGraph<T>& model);

template <typename T>
std::vector<std::string> parameterized_layers(const ModelGraph<T>& model);

// Copy of `model` with `upto` and every later parameterized layer re-initialized.
template <typename T>
ModelGraph<T> randomize_from_end(const ModelGraph<T>& model, std::string_view upto,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Desk-scale ResNet
// ---------------------------------------------------------------------------

struct MiniResNetConfig {
  int input_channels = 3;
  int image_size = 64;
  int classes = 4;
  std::vector<int> widths{16, 32, 64, 128};
  int blocks_per_stage = 2;
};

nlohmann::json to_json(const MiniResNetConfig& cfg);
MiniResNetConfig mini_resnet_config_from_json(const nlohmann::json& j);

/// Stem conv (3x3, stride 2) followed by one stage per entry of `widths`.
/// Each stage opens with a 3x3 stride-2 conv, so the model has exactly
/// 1 + stages downsampling convs; the stem one is marked never_replace.
/// Residual skips that change resolution use 2x2 average pooling plus a 1x1
/// projection, keeping every strided conv on the main path.
///
/// Layer ids: "stem", "stageS.blockB.conv1" ... "stageS.blockB.out", "pool",
/// "fc"; "stageS.out" aliases the last block output of stage S.
template <typename T>
ModelGraph<T> build_mini_resnet(const MiniResNetConfig& cfg, std::uint64_t seed);

// "stage2.block1.out" / "stage2.out" -> "2_1" / "2_2"; other ids unchanged.
std::string display_layer_name(const std::string& resolved_id);

// Hidden stage outputs whose gradient crosses at least one eligible
// downsampling conv: "stage1.out" .. "stage{S-1}.out".
template <typename T>
std::vector<std::string> eligible_hidden_stages(const ModelGraph<T>& model);

}  // namespace smoothsal
