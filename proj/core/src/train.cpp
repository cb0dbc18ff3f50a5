// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/train.hpp"

#include <cmath>
#include <numeric>

#include "smoothsal/errors.hpp"

namespace smoothsal {

template <typename T>
void Adam<T>::step(std::map<std::string, Tensor<T>>& params,
                   const std::map<std::string, Tensor<T>>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  for (const auto& [key, g] : grads) {
    auto pit = params.find(key);
    if (pit == params.end()) throw UsageError("Adam: gradient for unknown parameter " + key);
    Tensor<T>& p = pit->second;
    require_same_shape(p.shape(), g.shape(), "Adam");
    auto [mit, fresh] = moments_.try_emplace(key, Tensor<T>(p.shape()), Tensor<T>(p.shape()));
    (void)fresh;
    auto pm = mit->second.first.data();
    auto pv = mit->second.second.data();
    auto pp = p.data();
    const auto pg = g.data();
    for (std::size_t i = 0; i < pp.size(); ++i) {
      pm[i] = b1 * pm[i] + (T(1) - b1) * pg[i];
      pv[i] = b2 * pv[i] + (T(1) - b2) * pg[i] * pg[i];
      const double mhat = pm[i] / c1;
      const double vhat = pv[i] / c2;
      pp[i] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

nlohmann::json to_json(const TrainingLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  }
  return {{"epochs", epochs}, {"steps", log.steps}};
}

template <typename T>
std::vector<std::int64_t> predict_classes(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("predict_classes: logits must be N x K");
  const std::int64_t n = logits.dim(0);
  const std::int64_t k = logits.dim(1);
  std::vector<std::int64_t> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const T* row = logits.data().data() + i * k;
    if (k == 1) {
      out[static_cast<std::size_t>(i)] = row[0] > T(0) ? 1 : 0;
      continue;
    }
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

template <typename T>
TrainingLog train(ModelGraph<T>& model, const LabeledImages<T>& data, const TrainOptions& options) {
  if (data.size() < 1) throw UsageError("train: empty dataset");
  if (options.batch_size < 1 || options.epochs < 0) throw ConfigError("train: invalid batch size or epochs");
  const std::int64_t label_limit = std::max(model.classes, 2);
  for (auto l : data.labels) {
    if (l < 0 || l >= label_limit) throw UsageError("train: label out of range");
  }

  Adam<T> adam(options.adam);
  TrainingLog log;
  Rng rng = make_rng(options.seed, "data");
  std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);

  std::map<std::string, BatchStats<T>> running;
  if (options.batch_statistics) {
    for (const auto& l : model.layers) {
      if (l.kind != LayerKind::frozen_batchnorm) continue;
      running[l.id] = {Tensor<T>({l.in_channels}), Tensor<T>::ones({l.in_channels})};
    }
  }
  const T momentum = static_cast<T>(options.running_momentum);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
    double loss_sum = 0.0;
    std::int64_t batches = 0;
    std::int64_t correct = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t count = std::min(order.size() - first, static_cast<std::size_t>(options.batch_size));
      const std::span<const std::int64_t> idx(order.data() + first, count);
      const LabeledImages<T> batch = data.subset(idx);

      Tape<T> tape;
      ForwardOptions<T> fo;
      fo.params_require_grad = true;
      std::map<std::string, BatchStats<T>> batch_stats;
      if (!running.empty()) fo.batch_statistics = &batch_stats;
      auto res = forward(model, tape, batch.images, fo);
      Var<T> loss = model.classes == 1 ? bce_with_logits(res.logits, batch.labels)
                                       : cross_entropy(res.logits, batch.labels);
      const double value = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(value)) throw TrainingError("training loss is not finite", epoch);
      tape.backward(loss);

      std::map<std::string, Tensor<T>> grads;
      for (const auto& [key, var] : res.params) {
        if (tape.has_grad(var)) grads.emplace(key, tape.grad(var));
      }
      adam.step(model.params, grads);
      for (auto& [id, r] : running) {
        const BatchStats<T>& b = batch_stats.at(id);
        for (std::int64_t c = 0; c < r.mean.numel(); ++c) {
          r.mean[c] = (T(1) - momentum) * r.mean[c] + momentum * b.mean[c];
          r.var[c] = (T(1) - momentum) * r.var[c] + momentum * b.var[c];
        }
      }

      const auto pred = predict_classes(res.logits.value());
      for (std::size_t j = 0; j < count; ++j) correct += pred[j] == batch.labels[j] ? 1 : 0;
      loss_sum += value;
      ++batches;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches),
                    static_cast<double>(correct) / static_cast<double>(data.size())};
    log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  for (const auto& [id, r] : running) {
    Tensor<T>& scale = model.params.at(id + ".scale");
    Tensor<T>& shift = model.params.at(id + ".shift");
    for (std::int64_t c = 0; c < scale.numel(); ++c) {
      const T folded = scale[c] / std::sqrt(r.var[c] + static_cast<T>(kBatchNormEpsilon));
      shift[c] -= r.mean[c] * folded;
      scale[c] = folded;
    }
  }
  log.steps = adam.steps();
  return log;
}

template class Adam<float>;
template class Adam<double>;
template TrainingLog train<float>(ModelGraph<float>&, const LabeledImages<float>&, const TrainOptions&);
template TrainingLog train<double>(ModelGraph<double>&, const LabeledImages<double>&, const TrainOptions&);
template std::vector<std::int64_t> predict_classes<float>(const Tensor<float>&);
template std::vector<std::int64_t> predict_classes<double>(const Tensor<double>&);

}  // namespace smoothsal
