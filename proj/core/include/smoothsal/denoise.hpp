// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// Checkerboard removal for strided convolutions: a gradient roll-averaging
// backward hook, a roll-averaged forward hook, and a trained
// conv -> bilinear down -> conv surrogate. Every mode leaves the first
// downsampling conv of a model untouched.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothsal/dataset.hpp"
#include "smoothsal/model.hpp"
#include "smoothsal/train.hpp"

namespace smoothsal {

enum class HookMode { original, backward_hook, forward_hook, surrogate };

std::string_view to_string(HookMode mode);
// Accepts "original", "surrogate", "backward", "forward" and the *_hook spellings.
HookMode hook_mode_from_string(std::string_view name);

struct RollSet {
  std::vector<RollOffset> forward{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  // Default: the negated forward offsets, which makes the backward hook the
  // exact adjoint of the forward hook.
  std::vector<RollOffset> backward{{0, 0}, {0, -1}, {-1, 0}, {-1, -1}};

  // Backward offsets equal to the forward ones.
  static RollSet literal();
  void validate() const;
};

// Mean of the four rolled copies of a conv input-gradient.
template <typename T>
Tensor<T> backward_hook(const Tensor<T>& grad_input, const RollSet& rolls);

// Identity in the forward pass; the backward pass returns the mean of the
// incoming gradient rolled by each offset.
template <typename T>
Var<T> grad_roll_average(Var<T> x, const std::vector<RollOffset>& offsets);

// (1/4) sum_i conv2d(roll2d(input, d_i)) over the forward offsets.
template <typename T>
Var<T> forward_hook(Var<T> input, Var<T> weight, std::optional<Var<T>> bias, Conv2dGeometry geom,
                    const RollSet& rolls);

// ---------------------------------------------------------------------------
// Bilinear surrogate
// ---------------------------------------------------------------------------

/// Replacement for one 3x3 stride-2 padding-1 conv:
///   conv_pre (3x3, s1, p1, Cin -> Cin) -> bilinear_down2x -> conv_post (3x3, s1, p1, Cin -> Cout).
/// Parameters are keyed "pre.weight", "pre.bias", "post.weight", "post.bias".
template <typename T>
struct SurrogatePath {
  std::string target;  // resolved id of the replaced conv
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::map<std::string, Tensor<T>> params;

  std::vector<double> epoch_loss;  // mean L1 per epoch
  double final_l1 = 0.0;
  std::string warning;  // non-empty when the first epoch did not reduce the loss

  template <typename U>
  SurrogatePath<U> cast() const {
    SurrogatePath<U> out{target, in_channels, out_channels, {}, epoch_loss, final_l1, warning};
    for (const auto& [k, v] : params) out.params.emplace(k, v.template cast<U>());
    return out;
  }
};

template <typename T>
using SurrogateMap = std::map<std::string, SurrogatePath<T>>;

// Throws ConfigError unless `spec` is a 3x3 stride-2 padding-1 conv.
void require_surrogate_geometry(const LayerSpec& spec);

// Dirac conv_pre plus N(0, 0.01^2) noise from stream "surrogate-init/<id>";
// conv_post copies the replaced conv's kernel and bias.
template <typename T>
SurrogatePath<T> init_surrogate(const ModelGraph<T>& model, std::string_view conv_id, std::uint64_t seed);

// Records the path on the input's tape. When `param_vars` is given the
// parameters are gradient-carrying leaves returned through it.
template <typename T>
Var<T> surrogate_forward(const SurrogatePath<T>& path, Var<T> input,
                         std::map<std::string, Var<T>>* param_vars = nullptr);

template <typename T>
Tensor<T> surrogate_forward(const SurrogatePath<T>& path, const Tensor<T>& input);

struct SurrogateTrainOptions {
  AdamConfig adam;  // lr 1e-3
  int epochs = 10;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::vector<std::string> layers;  // empty: every eligible downsampling conv
  std::function<void(const std::string& layer, int epoch, double loss)> on_epoch;
};

/// Fits one surrogate per requested conv on (conv input, conv output) pairs
/// taken from forwards of the frozen, unmodified model over `data`. Each
/// path sees only the original network upstream of its conv.
template <typename T>
SurrogateMap<T> train_surrogates(const ModelGraph<T>& model, const LabeledImages<T>& data,
                                 const SurrogateTrainOptions& options);

template <typename T>
void save_surrogate(const SurrogatePath<T>& path, const std::filesystem::path& dir);
template <typename T>
SurrogatePath<T> load_surrogate(const std::filesystem::path& dir);

// <model_dir>/surrogates/<layer-id>/ per path.
template <typename T>
void save_surrogates(const SurrogateMap<T>& paths, const std::filesystem::path& model_dir);
// Loads every surrogate directory present; absent directory gives an empty map.
template <typename T>
SurrogateMap<T> load_surrogates(const std::filesystem::path& model_dir);

nlohmann::json surrogate_log_json(const std::map<std::string, std::vector<double>>& curves);

// ---------------------------------------------------------------------------
// Model view
// ---------------------------------------------------------------------------

/// Non-destructive evaluation view of a model under one hook mode. Holds a
/// pointer to the model, which must outlive the view.
template <typename T>
class ModelView {
 public:
  ModelView(const ModelGraph<T>& model, HookMode mode, RollSet rolls,
            std::shared_ptr<const SurrogateMap<T>> surrogates);

  const ModelGraph<T>& graph() const { return *model_; }
  HookMode mode() const { return mode_; }
  const RollSet& rolls() const { return rolls_; }
  // Convs whose computation this view changes; empty in original mode.
  const std::vector<std::string>& modified_convs() const { return modified_; }

  ForwardResult<T> forward(Tape<T>& tape, const Tensor<T>& batch, ForwardOptions<T> options = {}) const;
  Tensor<T> logits(const Tensor<T>& batch) const;

 private:
  const ModelGraph<T>* model_;
  HookMode mode_;
  RollSet rolls_;
  std::shared_ptr<const SurrogateMap<T>> surrogates_;
  std::vector<std::string> modified_;
};

// Surrogate mode requires a path for every eligible conv (ConfigError otherwise).
template <typename T>
ModelView<T> attach(const ModelGraph<T>& model, HookMode mode, const RollSet& rolls = {},
                    std::shared_ptr<const SurrogateMap<T>> surrogates = nullptr);

}  // namespace smoothsal
