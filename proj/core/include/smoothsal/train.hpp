// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothsal/dataset.hpp"
#include "smoothsal/model.hpp"

namespace smoothsal {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created lazily per key.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::map<std::string, Tensor<T>>& params, const std::map<std::string, Tensor<T>>& grads);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments_;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;      // mean over the epoch's batches
  double accuracy = 0.0;  // on the training batches as seen
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::int64_t steps = 0;
};

nlohmann::json to_json(const TrainingLog& log);

struct TrainOptions {
  AdamConfig adam;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;
  // frozen_batchnorm layers train on batch statistics; their running
  // averages are folded into scale/shift when training ends.
  bool batch_statistics = true;
  double running_momentum = 0.1;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Cross-entropy training (binary cross-entropy for single-logit heads) of
// every parameter of `model`. Batches are drawn from a per-epoch shuffle of
// the "data" stream of `seed`; results are bit-identical for a given seed.
// Throws TrainingError when the loss stops being finite.
template <typename T>
TrainingLog train(ModelGraph<T>& model, const LabeledImages<T>& data, const TrainOptions& options);

// Argmax with ties to the lowest index; single-logit heads predict logit > 0.
template <typename T>
std::vector<std::int64_t> predict_classes(const Tensor<T>& logits);

}  // namespace smoothsal
