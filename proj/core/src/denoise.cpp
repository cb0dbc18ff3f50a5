// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/denoise.hpp"

#include <algorithm>

#include "smoothsal/errors.hpp"

namespace smoothsal {

std::string_view to_string(HookMode mode) {
  switch (mode) {
    case HookMode::original:
      return "original";
    case HookMode::backward_hook:
      return "backward";
    case HookMode::forward_hook:
      return "forward";
    case HookMode::surrogate:
      return "surrogate";
  }
  return "original";
}

HookMode hook_mode_from_string(std::string_view name) {
  if (name == "original") return HookMode::original;
  if (name == "backward" || name == "backward_hook") return HookMode::backward_hook;
  if (name == "forward" || name == "forward_hook") return HookMode::forward_hook;
  if (name == "surrogate") return HookMode::surrogate;
  throw ConfigError("unknown hook mode '" + std::string(name) + "'");
}

RollSet RollSet::literal() {
  RollSet r;
  r.backward = r.forward;
  return r;
}

void RollSet::validate() const {
  for (const auto* set : {&forward, &backward}) {
    if (set->size() != 4) throw ConfigError("roll sets hold exactly four offsets");
    if (std::find(set->begin(), set->end(), RollOffset{0, 0}) == set->end()) {
      throw ConfigError("roll sets must contain the zero offset");
    }
  }
}

template <typename T>
Tensor<T> backward_hook(const Tensor<T>& grad_input, const RollSet& rolls) {
  Tensor<T> acc(grad_input.shape());
  for (const auto& d : rolls.backward) add_into(acc, roll2d(grad_input, d));
  const T inv = T(1) / static_cast<T>(rolls.backward.size());
  for (auto& v : acc.data()) v *= inv;
  return acc;
}

template <typename T>
Var<T> grad_roll_average(Var<T> x, const std::vector<RollOffset>& offsets) {
  if (offsets.empty()) throw UsageError("grad_roll_average needs at least one offset");
  return x.tape()->record(x.value(), {x}, [offsets](typename Tape<T>::Context& ctx) {
    const auto& g = ctx.grad_output();
    Tensor<T> acc(g.shape());
    for (const auto& d : offsets) add_into(acc, roll2d(g, d));
    const T inv = T(1) / static_cast<T>(offsets.size());
    for (auto& v : acc.data()) v *= inv;
    ctx.accumulate(0, std::move(acc));
  });
}

template <typename T>
Var<T> forward_hook(Var<T> input, Var<T> weight, std::optional<Var<T>> bias, Conv2dGeometry geom,
                    const RollSet& rolls) {
  if (rolls.forward.empty()) throw UsageError("forward_hook needs at least one offset");
  const auto& s = input.shape();
  if (s.size() != 4 || s[2] % 2 != 0 || s[3] % 2 != 0) {
    throw DimensionError("forward_hook expects N x C x H x W with even H and W, got " +
                         shape_string(s));
  }
  std::optional<Var<T>> acc;
  for (const auto& d : rolls.forward) {
    Var<T> y = conv2d(roll2d(input, d), weight, bias, geom);
    acc = acc ? add(*acc, y) : y;
  }
  return scale(*acc, T(1) / static_cast<T>(rolls.forward.size()));
}

// ---------------------------------------------------------------------------
// ModelView
// ---------------------------------------------------------------------------

template <typename T>
ModelView<T>::ModelView(const ModelGraph<T>& model, HookMode mode, RollSet rolls,
                        std::shared_ptr<const SurrogateMap<T>> surrogates)
    : model_(&model), mode_(mode), rolls_(std::move(rolls)), surrogates_(std::move(surrogates)) {
  rolls_.validate();
  if (mode_ == HookMode::original) return;
  modified_ = list_downsampling_convs(model).eligible;
  for (const auto& id : modified_) {
    if (mode_ == HookMode::surrogate) {
      if (!surrogates_ || !surrogates_->count(id)) {
        throw ConfigError("surrogate mode: no trained surrogate for '" + id + "'");
      }
      const auto& p = surrogates_->at(id);
      const auto& spec = model.layer(id);
      if (p.in_channels != spec.in_channels || p.out_channels != spec.out_channels) {
        throw ConfigError("surrogate for '" + id + "' has mismatched channels");
      }
    }
  }
}

template <typename T>
ForwardResult<T> ModelView<T>::forward(Tape<T>& tape, const Tensor<T>& batch,
                                       ForwardOptions<T> options) const {
  if (mode_ != HookMode::original) {
    options.conv_override = [this](const LayerSpec& spec, Var<T> x, Var<T> w,
                                   std::optional<Var<T>> b) -> std::optional<Var<T>> {
      if (std::find(modified_.begin(), modified_.end(), spec.id) == modified_.end()) return std::nullopt;
      const Conv2dGeometry geom{spec.stride, spec.padding};
      switch (mode_) {
        case HookMode::backward_hook:
          return conv2d(grad_roll_average(x, rolls_.backward), w, b, geom);
        case HookMode::forward_hook:
          return forward_hook(x, w, b, geom, rolls_);
        case HookMode::surrogate:
          return surrogate_forward(surrogates_->at(spec.id), x);
        case HookMode::original:
          break;
      }
      return std::nullopt;
    };
  }
  return smoothsal::forward(*model_, tape, batch, options);
}

template <typename T>
Tensor<T> ModelView<T>::logits(const Tensor<T>& batch) const {
  Tape<T> tape;
  return forward(tape, batch).logits.value();
}

template <typename T>
ModelView<T> attach(const ModelGraph<T>& model, HookMode mode, const RollSet& rolls,
                    std::shared_ptr<const SurrogateMap<T>> surrogates) {
  return ModelView<T>(model, mode, rolls, std::move(surrogates));
}

#define SMOOTHSAL_DENOISE_INSTANTIATE(T)                                                        \
  template Tensor<T> backward_hook<T>(const Tensor<T>&, const RollSet&);                       \
  template Var<T> grad_roll_average<T>(Var<T>, const std::vector<RollOffset>&);                \
  template Var<T> forward_hook<T>(Var<T>, Var<T>, std::optional<Var<T>>, Conv2dGeometry,       \
                                  const RollSet&);                                             \
  template class ModelView<T>;                                                                 \
  template ModelView<T> attach<T>(const ModelGraph<T>&, HookMode, const RollSet&,              \
                                  std::shared_ptr<const SurrogateMap<T>>);

SMOOTHSAL_DENOISE_INSTANTIATE(float)
SMOOTHSAL_DENOISE_INSTANTIATE(double)

}  // namespace smoothsal
