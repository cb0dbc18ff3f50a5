// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smoothsal/checkpoint.hpp"
#include "smoothsal/denoise.hpp"
#include "smoothsal/errors.hpp"

namespace smoothsal {

void require_surrogate_geometry(const LayerSpec& spec) {
  if (spec.kind != LayerKind::conv || spec.kernel != 3 || spec.stride != 2 || spec.padding != 1) {
    throw ConfigError("cannot build a surrogate for '" + spec.id +
                      "': only 3x3 stride-2 padding-1 convolutions are supported");
  }
}

template <typename T>
SurrogatePath<T> init_surrogate(const ModelGraph<T>& model, std::string_view conv_id, std::uint64_t seed) {
  const LayerSpec& spec = model.layer(conv_id);
  require_surrogate_geometry(spec);
  SurrogatePath<T> p;
  p.target = spec.id;
  p.in_channels = spec.in_channels;
  p.out_channels = spec.out_channels;

  const std::int64_t c = spec.in_channels;
  Tensor<T> pre({c, c, 3, 3});
  Rng rng = make_rng(seed, "surrogate-init/" + spec.id);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& v : pre.data()) v = static_cast<T>(noise(rng));
  for (std::int64_t k = 0; k < c; ++k) pre[((k * c + k) * 3 + 1) * 3 + 1] += T(1);
  p.params["pre.weight"] = std::move(pre);
  p.params["pre.bias"] = Tensor<T>({c});
  p.params["post.weight"] = model.param(spec.id, "weight");
  p.params["post.bias"] = spec.bias ? model.param(spec.id, "bias") : Tensor<T>({spec.out_channels});
  return p;
}

template <typename T>
Var<T> surrogate_forward(const SurrogatePath<T>& path, Var<T> input,
                         std::map<std::string, Var<T>>* param_vars) {
  const auto& s = input.shape();
  if (s.size() != 4 || s[1] != path.in_channels) {
    throw DimensionError("surrogate for '" + path.target + "' expects " +
                         std::to_string(path.in_channels) + " input channels, got " + shape_string(s));
  }
  Tape<T>& tape = *input.tape();
  auto leaf = [&](const char* key) {
    Var<T> v = tape.leaf(path.params.at(key), param_vars != nullptr);
    if (param_vars) (*param_vars)[key] = v;
    return v;
  };
  const Conv2dGeometry same{1, 1};
  Var<T> h = conv2d(input, leaf("pre.weight"), std::optional<Var<T>>(leaf("pre.bias")), same);
  h = bilinear_down2x(h);
  return conv2d(h, leaf("post.weight"), std::optional<Var<T>>(leaf("post.bias")), same);
}

template <typename T>
Tensor<T> surrogate_forward(const SurrogatePath<T>& path, const Tensor<T>& input) {
  Tape<T> tape;
  return surrogate_forward(path, tape.leaf(input)).value();
}

namespace {

// Mean L1 of the path over `data`, evaluated batch by batch in sample order.
template <typename T>
std::map<std::string, double> evaluate_l1(const ModelGraph<T>& model, const SurrogateMap<T>& paths,
                                          const LabeledImages<T>& data, int batch_size) {
  std::map<std::string, double> sums;
  ForwardOptions<T> fo;
  for (const auto& [id, p] : paths) {
    fo.capture.push_back(model.layer(id).inputs.at(0));
    fo.capture.push_back(id);
  }
  double count = 0.0;
  for (std::int64_t first = 0; first < data.size(); first += batch_size) {
    const std::int64_t n = std::min<std::int64_t>(batch_size, data.size() - first);
    Tape<T> tape;
    auto res = forward(model, tape, slice_batch(data.images, first, n), fo);
    for (const auto& [id, p] : paths) {
      const Tensor<T> out = surrogate_forward(p, res.captured.at(model.layer(id).inputs.at(0)).value());
      const Tensor<T>& target = res.captured.at(id).value();
      double s = 0.0;
      for (std::int64_t i = 0; i < out.numel(); ++i) s += std::abs(static_cast<double>(out[i] - target[i]));
      sums[id] += s / static_cast<double>(target.numel() / n);
    }
    count += static_cast<double>(n);
  }
  for (auto& [id, s] : sums) s /= count;
  return sums;
}

}  // namespace

template <typename T>
SurrogateMap<T> train_surrogates(const ModelGraph<T>& model, const LabeledImages<T>& data,
                                 const SurrogateTrainOptions& options) {
  if (data.size() < 1) throw UsageError("train_surrogates: empty dataset");
  if (options.batch_size < 1 || options.epochs < 1) {
    throw ConfigError("train_surrogates: batch size and epochs must be positive");
  }
  std::vector<std::string> layers = options.layers;
  if (layers.empty()) layers = list_downsampling_convs(model).eligible;
  for (auto& id : layers) id = model.layer(id).id;

  SurrogateMap<T> paths;
  std::map<std::string, Adam<T>> optimizers;
  ForwardOptions<T> harvest;
  for (const auto& id : layers) {
    paths.emplace(id, init_surrogate(model, id, options.seed));
    optimizers.emplace(id, Adam<T>(options.adam));
    harvest.capture.push_back(model.layer(id).inputs.at(0));
    harvest.capture.push_back(id);
  }

  Rng rng = make_rng(options.seed, "surrogate-data");
  std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
    std::map<std::string, std::vector<double>> batch_losses;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t count = std::min(order.size() - first, static_cast<std::size_t>(options.batch_size));
      const Tensor<T> images =
          gather_batch(data.images, std::span<const std::int64_t>(order.data() + first, count));
      Tape<T> frozen;
      auto res = forward(model, frozen, images, harvest);
      for (const auto& id : layers) {
        auto& path = paths.at(id);
        Tape<T> tape;
        std::map<std::string, Var<T>> pv;
        Var<T> x = tape.leaf(res.captured.at(model.layer(id).inputs.at(0)).value());
        Var<T> loss = l1_loss(surrogate_forward(path, x, &pv), res.captured.at(id).value());
        const double value = static_cast<double>(loss.value()[0]);
        if (!std::isfinite(value)) throw TrainingError("surrogate loss for '" + id + "' is not finite", epoch);
        tape.backward(loss);
        std::map<std::string, Tensor<T>> grads;
        for (const auto& [key, v] : pv) grads.emplace(key, tape.grad(v));
        optimizers.at(id).step(path.params, grads);
        batch_losses[id].push_back(value);
      }
    }
    for (const auto& id : layers) {
      const auto& bl = batch_losses.at(id);
      const double mean = std::accumulate(bl.begin(), bl.end(), 0.0) / static_cast<double>(bl.size());
      auto& path = paths.at(id);
      path.epoch_loss.push_back(mean);
      if (epoch == 0 && bl.size() >= 4) {
        const std::size_t q = bl.size() / 4;
        const double head = std::accumulate(bl.begin(), bl.begin() + q, 0.0) / static_cast<double>(q);
        const double tail = std::accumulate(bl.end() - q, bl.end(), 0.0) / static_cast<double>(q);
        if (tail >= head) path.warning = "loss did not decrease during the first epoch";
      }
      if (options.on_epoch) options.on_epoch(id, epoch, mean);
    }
  }
  for (const auto& [id, l1] : evaluate_l1(model, paths, data, options.batch_size)) {
    paths.at(id).final_l1 = l1;
  }
  return paths;
}

template <typename T>
void save_surrogate(const SurrogatePath<T>& path, const std::filesystem::path& dir) {
  TensorBundle<T> b;
  b.manifest["kind"] = "surrogate";
  b.manifest["target"] = path.target;
  b.manifest["in_channels"] = path.in_channels;
  b.manifest["out_channels"] = path.out_channels;
  b.manifest["epoch_loss"] = path.epoch_loss;
  b.manifest["final_l1"] = path.final_l1;
  b.manifest["warning"] = path.warning;
  b.tensors = path.params;
  save_bundle(b, dir);
}

template <typename T>
SurrogatePath<T> load_surrogate(const std::filesystem::path& dir) {
  TensorBundle<T> b = load_bundle<T>(dir);
  const nlohmann::json& m = b.manifest;
  if (m.value("kind", "") != "surrogate") throw FormatError(dir.string() + " is not a surrogate checkpoint");
  SurrogatePath<T> p;
  try {
    p.target = m.at("target").get<std::string>();
    p.in_channels = m.at("in_channels").get<std::int64_t>();
    p.out_channels = m.at("out_channels").get<std::int64_t>();
    p.epoch_loss = m.at("epoch_loss").get<std::vector<double>>();
    p.final_l1 = m.at("final_l1").get<double>();
    p.warning = m.at("warning").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed surrogate manifest: " + e.what());
  }
  p.params = std::move(b.tensors);
  const Shape want_pre{p.in_channels, p.in_channels, 3, 3};
  const Shape want_post{p.out_channels, p.in_channels, 3, 3};
  for (const char* key : {"pre.weight", "pre.bias", "post.weight", "post.bias"}) {
    if (!p.params.count(key)) throw FormatError(dir.string() + ": missing surrogate tensor " + key);
  }
  if (p.params.at("pre.weight").shape() != want_pre || p.params.at("post.weight").shape() != want_post) {
    throw FormatError(dir.string() + ": surrogate weights do not match its channel counts");
  }
  return p;
}

template <typename T>
void save_surrogates(const SurrogateMap<T>& paths, const std::filesystem::path& model_dir) {
  for (const auto& [id, p] : paths) save_surrogate(p, model_dir / "surrogates" / id);
}

template <typename T>
SurrogateMap<T> load_surrogates(const std::filesystem::path& model_dir) {
  SurrogateMap<T> out;
  const auto root = model_dir / "surrogates";
  if (!std::filesystem::is_directory(root)) return out;
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    SurrogatePath<T> p = load_surrogate<T>(d);
    const std::string id = p.target;
    out.emplace(id, std::move(p));
  }
  return out;
}

nlohmann::json surrogate_log_json(const std::map<std::string, std::vector<double>>& curves) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, c] : curves) j[id] = c;
  return j;
}

#define SMOOTHSAL_SURROGATE_INSTANTIATE(T)                                                        \
  template SurrogatePath<T> init_surrogate<T>(const ModelGraph<T>&, std::string_view, std::uint64_t); \
  template Var<T> surrogate_forward<T>(const SurrogatePath<T>&, Var<T>, std::map<std::string, Var<T>>*); \
  template Tensor<T> surrogate_forward<T>(const SurrogatePath<T>&, const Tensor<T>&);            \
  template SurrogateMap<T> train_surrogates<T>(const ModelGraph<T>&, const LabeledImages<T>&,    \
                                               const SurrogateTrainOptions&);                    \
  template void save_surrogate<T>(const SurrogatePath<T>&, const std::filesystem::path&);        \
  template SurrogatePath<T> load_surrogate<T>(const std::filesystem::path&);                     \
  template void save_surrogates<T>(const SurrogateMap<T>&, const std::filesystem::path&);        \
  template SurrogateMap<T> load_surrogates<T>(const std::filesystem::path&);

SMOOTHSAL_SURROGATE_INSTANTIATE(float)
SMOOTHSAL_SURROGATE_INSTANTIATE(double)

}  // namespace smoothsal
