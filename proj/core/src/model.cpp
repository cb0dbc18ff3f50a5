// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/model.hpp"

#include <algorithm>
#include <cmath>

#include "smoothsal/errors.hpp"

namespace smoothsal {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::conv, "conv"},
    {LayerKind::relu, "relu"},
    {LayerKind::residual_add, "residual_add"},
    {LayerKind::maxpool2x, "maxpool2x"},
    {LayerKind::avgpool2x, "avgpool2x"},
    {LayerKind::global_avg_pool, "global_avg_pool"},
    {LayerKind::linear, "linear"},
    {LayerKind::frozen_batchnorm, "frozen_batchnorm"},
};

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

std::vector<std::string> LayerSpec::param_names() const {
  switch (kind) {
    case LayerKind::conv:
      return bias ? std::vector<std::string>{"weight", "bias"} : std::vector<std::string>{"weight"};
    case LayerKind::linear:
      return {"weight", "bias"};
    case LayerKind::frozen_batchnorm:
      return {"scale", "shift"};
    default:
      return {};
  }
}

nlohmann::json to_json(const LayerSpec& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["kind"] = std::string(to_string(s.kind));
  j["inputs"] = s.inputs;
  j["in_channels"] = s.in_channels;
  j["out_channels"] = s.out_channels;
  j["kernel"] = s.kernel;
  j["stride"] = s.stride;
  j["padding"] = s.padding;
  j["bias"] = s.bias;
  j["never_replace"] = s.never_replace;
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec s;
  s.id = j.at("id").get<std::string>();
  s.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  s.inputs = j.at("inputs").get<std::vector<std::string>>();
  s.in_channels = j.value("in_channels", 0);
  s.out_channels = j.value("out_channels", 0);
  s.kernel = j.value("kernel", 0);
  s.stride = j.value("stride", 1);
  s.padding = j.value("padding", 0);
  s.bias = j.value("bias", false);
  s.never_replace = j.value("never_replace", false);
  return s;
}

// ---------------------------------------------------------------------------
// ModelGraph
// ---------------------------------------------------------------------------

template <typename T>
std::string ModelGraph<T>::resolve(std::string_view id) const {
  std::string cur(id);
  for (int hops = 0; hops < 8; ++hops) {
    auto it = aliases.find(cur);
    if (it == aliases.end()) return cur;
    cur = it->second;
  }
  throw ConfigError("alias cycle at '" + std::string(id) + "'");
}

template <typename T>
bool ModelGraph<T>::has_layer(std::string_view id) const {
  const std::string r = resolve(id);
  return std::any_of(layers.begin(), layers.end(), [&](const LayerSpec& l) { return l.id == r; });
}

template <typename T>
std::size_t ModelGraph<T>::index_of(std::string_view id) const {
  const std::string r = resolve(id);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].id == r) return i;
  }
  throw UsageError("unknown layer id '" + std::string(id) + "'");
}

template <typename T>
const LayerSpec& ModelGraph<T>::layer(std::string_view id) const {
  return layers[index_of(id)];
}

template <typename T>
const Tensor<T>& ModelGraph<T>::param(std::string_view layer_id, std::string_view name) const {
  auto it = params.find(param_key(resolve(layer_id), name));
  if (it == params.end()) {
    throw UsageError("missing parameter " + param_key(layer_id, name));
  }
  return it->second;
}

template <typename T>
Tensor<T>& ModelGraph<T>::param(std::string_view layer_id, std::string_view name) {
  auto it = params.find(param_key(resolve(layer_id), name));
  if (it == params.end()) {
    throw UsageError("missing parameter " + param_key(layer_id, name));
  }
  return it->second;
}

template <typename T>
std::string ModelGraph<T>::last_spatial_layer() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (layer_shape(it->id).size() == 3) return it->id;
  }
  throw UsageError("model has no spatial layer");
}

template <typename T>
Shape ModelGraph<T>::layer_shape(std::string_view id) const {
  if (id == kInputLayer) return {input.channels, input.height, input.width};
  const std::size_t target = index_of(id);
  std::map<std::string, Shape> shapes;
  shapes[std::string(kInputLayer)] = {input.channels, input.height, input.width};
  for (std::size_t i = 0; i <= target; ++i) {
    const auto& l = layers[i];
    const Shape& in = shapes.at(l.inputs.at(0));
    Shape out;
    switch (l.kind) {
      case LayerKind::conv:
        out = {l.out_channels, conv_output_extent(in.at(1), l.kernel, l.stride, l.padding),
               conv_output_extent(in.at(2), l.kernel, l.stride, l.padding)};
        break;
      case LayerKind::maxpool2x:
      case LayerKind::avgpool2x:
        out = {in.at(0), in.at(1) / 2, in.at(2) / 2};
        break;
      case LayerKind::global_avg_pool:
        out = {in.at(0)};
        break;
      case LayerKind::linear:
        out = {l.out_channels};
        break;
      default:
        out = in;
    }
    shapes[l.id] = out;
  }
  return shapes.at(layers[target].id);
}

template <typename T>
void ModelGraph<T>::validate() const {
  std::set<std::string> seen{std::string(kInputLayer)};
  if (layers.empty()) throw ConfigError("model has no layers");
  if (classes < 1) throw ConfigError("model needs at least one output");
  for (const auto& l : layers) {
    if (!seen.insert(l.id).second) throw ConfigError("duplicate layer id '" + l.id + "'");
    if (l.inputs.empty()) throw ConfigError("layer '" + l.id + "' has no inputs");
    for (const auto& in : l.inputs) {
      if (!seen.count(in) || in == l.id) {
        throw ConfigError("layer '" + l.id + "' consumes '" + in + "' before it is defined");
      }
    }
    const std::size_t want_inputs = l.kind == LayerKind::residual_add ? 2 : 1;
    if (l.inputs.size() != want_inputs) {
      throw ConfigError("layer '" + l.id + "' has the wrong number of inputs");
    }
    if (l.kind == LayerKind::conv && (l.stride < 1 || l.stride > 2)) {
      throw ConfigError("layer '" + l.id + "': stride must be 1 or 2");
    }
    for (const auto& p : l.param_names()) {
      if (!params.count(param_key(l.id, p))) {
        throw ConfigError("layer '" + l.id + "' is missing parameter '" + p + "'");
      }
    }
  }
  for (const auto& [alias, target] : aliases) {
    if (!has_layer(target)) throw ConfigError("alias '" + alias + "' targets unknown layer");
  }
  const Shape out = layer_shape(layers.back().id);
  if (out != Shape{classes}) {
    throw ConfigError("final layer produces " + shape_string(out) + ", expected " +
                      std::to_string(classes) + " logits");
  }
}

template <typename T>
void initialize_layer(ModelGraph<T>& model, const LayerSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case LayerKind::conv:
    case LayerKind::linear: {
      auto& w = model.params.at(param_key(spec.id, "weight"));
      const std::int64_t fan_in = w.numel() / w.dim(0);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : w.data()) v = static_cast<T>(dist(rng));
      auto b = model.params.find(param_key(spec.id, "bias"));
      if (b != model.params.end()) std::fill(b->second.data().begin(), b->second.data().end(), T(0));
      break;
    }
    case LayerKind::frozen_batchnorm: {
      auto& s = model.params.at(param_key(spec.id, "scale"));
      auto& t = model.params.at(param_key(spec.id, "shift"));
      std::fill(s.data().begin(), s.data().end(), T(1));
      std::fill(t.data().begin(), t.data().end(), T(0));
      break;
    }
    default:
      break;
  }
}

template <typename T>
void add_layer(ModelGraph<T>& model, LayerSpec spec) {
  switch (spec.kind) {
    case LayerKind::conv:
      model.params[param_key(spec.id, "weight")] =
          Tensor<T>({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
      if (spec.bias) model.params[param_key(spec.id, "bias")] = Tensor<T>({spec.out_channels});
      break;
    case LayerKind::linear:
      model.params[param_key(spec.id, "weight")] = Tensor<T>({spec.out_channels, spec.in_channels});
      model.params[param_key(spec.id, "bias")] = Tensor<T>({spec.out_channels});
      break;
    case LayerKind::frozen_batchnorm:
      model.params[param_key(spec.id, "scale")] = Tensor<T>::ones({spec.in_channels});
      model.params[param_key(spec.id, "shift")] = Tensor<T>({spec.in_channels});
      break;
    default:
      break;
  }
  model.layers.push_back(std::move(spec));
}

template <typename T>
void initialize_all(ModelGraph<T>& model, std::uint64_t seed) {
  for (const auto& l : model.layers) {
    Rng rng = make_rng(seed, "init/" + l.id);
    initialize_layer(model, l, rng);
  }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

template <typename T>
ForwardResult<T> forward(const ModelGraph<T>& model, Tape<T>& tape, const Tensor<T>& batch,
                         const ForwardOptions<T>& options) {
  const auto& in = model.input;
  if (batch.rank() != 4 || batch.dim(1) != in.channels || batch.dim(2) != in.height ||
      batch.dim(3) != in.width) {
    throw DimensionError("forward: batch " + shape_string(batch.shape()) +
                         " does not match model input " + std::to_string(in.channels) + "x" +
                         std::to_string(in.height) + "x" + std::to_string(in.width));
  }
  const std::size_t n_layers = model.layers.size();

  // Resolve requested ids up front so typos fail before any work.
  std::map<std::string, std::vector<std::string>> capture_by_layer;
  for (const auto& c : options.capture) {
    const std::string r = c == kInputLayer ? std::string(kInputLayer) : model.layers[model.index_of(c)].id;
    capture_by_layer[r].push_back(c);
  }
  std::map<std::string, const Tensor<T>*> inject;
  for (const auto& [id, t] : options.inject) {
    inject[model.layers[model.index_of(id)].id] = &t;
  }

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n_layers; ++i) index[model.layers[i].id] = i;

  std::vector<bool> needed(n_layers, false);
  bool input_needed = capture_by_layer.count(std::string(kInputLayer)) > 0;
  std::vector<std::size_t> stack{n_layers - 1};
  for (const auto& [id, _] : capture_by_layer) {
    if (id != kInputLayer) stack.push_back(index.at(id));
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (needed[i]) continue;
    needed[i] = true;
    const auto& l = model.layers[i];
    if (inject.count(l.id)) continue;
    for (const auto& src : l.inputs) {
      if (src == kInputLayer) {
        input_needed = true;
      } else {
        stack.push_back(index.at(src));
      }
    }
  }

  ForwardResult<T> result;
  std::vector<Var<T>> values(n_layers);
  Var<T> input_var;
  if (input_needed) {
    const bool watch_input = capture_by_layer.count(std::string(kInputLayer)) > 0;
    input_var = tape.leaf(batch, watch_input);
    if (watch_input) {
      for (const auto& name : capture_by_layer.at(std::string(kInputLayer))) {
        result.captured[name] = input_var;
      }
    }
  }
  auto value_of = [&](const std::string& id) -> Var<T> {
    if (id == kInputLayer) return input_var;
    return values[index.at(id)];
  };
  auto param_var = [&](const LayerSpec& l, const char* name) {
    const std::string key = param_key(l.id, name);
    Var<T> v = tape.leaf(model.params.at(key), options.params_require_grad);
    result.params[key] = v;
    return v;
  };

  for (std::size_t i = 0; i < n_layers; ++i) {
    if (!needed[i]) continue;
    const auto& l = model.layers[i];
    Var<T> out;
    if (auto it = inject.find(l.id); it != inject.end()) {
      out = tape.leaf(*it->second, true);
    } else {
      const Var<T> x = value_of(l.inputs[0]);
      switch (l.kind) {
        case LayerKind::conv: {
          const Var<T> w = param_var(l, "weight");
          std::optional<Var<T>> b;
          if (l.bias) b = param_var(l, "bias");
          std::optional<Var<T>> replaced;
          if (options.conv_override) replaced = options.conv_override(l, x, w, b);
          out = replaced ? *replaced : conv2d(x, w, b, Conv2dGeometry{l.stride, l.padding});
          break;
        }
        case LayerKind::relu: {
          if (options.record_relu_inputs) result.relu_inputs[l.id] = x.value();
          const Tensor<T>* ref = nullptr;
          if (options.relu_reference) {
            auto r = options.relu_reference->find(l.id);
            if (r != options.relu_reference->end()) ref = &r->second;
          }
          out = ref ? rescale_relu(x, *ref) : relu(x);
          break;
        }
        case LayerKind::residual_add:
          out = add(x, value_of(l.inputs[1]));
          break;
        case LayerKind::maxpool2x:
          out = max_pool_2x(x);
          break;
        case LayerKind::avgpool2x:
          out = bilinear_down2x(x);
          break;
        case LayerKind::global_avg_pool:
          out = global_average_pool(x);
          break;
        case LayerKind::linear:
          out = linear(x, param_var(l, "weight"), std::optional<Var<T>>(param_var(l, "bias")));
          break;
        case LayerKind::frozen_batchnorm:
          if (options.batch_statistics) {
            out = batch_norm(x, param_var(l, "scale"), param_var(l, "shift"), kBatchNormEpsilon,
                             &(*options.batch_statistics)[l.id]);
          } else {
            out = channel_affine(x, param_var(l, "scale"), param_var(l, "shift"));
          }
          break;
      }
    }
    if (auto c = capture_by_layer.find(l.id); c != capture_by_layer.end()) {
      if (!tape.requires_grad(out)) out = tape.watch(out);
      for (const auto& name : c->second) result.captured[name] = out;
    }
    values[i] = out;
  }
  result.logits = values[n_layers - 1];
  return result;
}

template <typename T>
Tensor<T> predict_logits(const ModelGraph<T>& model, const Tensor<T>& batch) {
  Tape<T> tape;
  return forward(model, tape, batch).logits.value();
}

template <typename T>
Tensor<T> probabilities(HeadKind head, const Tensor<T>& logits) {
  return head == HeadKind::sigmoid ? sigmoid(logits) : softmax(logits);
}

// ---------------------------------------------------------------------------
// Structure queries
// ---------------------------------------------------------------------------

template <typename T>
DownsamplingConvs list_downsampling_convs(const ModelGraph<T>& model) {
  DownsamplingConvs out;
  for (const auto& l : model.layers) {
    if (!l.is_downsampling_conv()) continue;
    out.all.push_back(l.id);
    // The first downsampling conv is never replaced, flagged or not.
    if (out.all.size() > 1 && !l.never_replace) out.eligible.push_back(l.id);
  }
  return out;
}

template <typename T>
std::vector<std::string> parameterized_layers(const ModelGraph<T>& model) {
  std::vector<std::string> out;
  for (const auto& l : model.layers) {
    if (l.has_params()) out.push_back(l.id);
  }
  return out;
}

template <typename T>
ModelGraph<T> randomize_from_end(const ModelGraph<T>& model, std::string_view upto,
                                 std::uint64_t seed) {
  const std::size_t start = model.index_of(upto);
  if (!model.layers[start].has_params()) {
    throw UsageError("randomize_from_end: '" + std::string(upto) + "' has no parameters");
  }
  ModelGraph<T> out = model;
  for (std::size_t i = start; i < out.layers.size(); ++i) {
    const auto& l = out.layers[i];
    if (!l.has_params()) continue;
    Rng rng = make_rng(seed, "randomize/" + l.id);
    initialize_layer(out, l, rng);
  }
  return out;
}

std::string display_layer_name(const std::string& id) {
  // stage<S>.block<B>.out -> S_B
  const std::string stage = "stage";
  const std::string block = ".block";
  const std::string tail = ".out";
  if (id.rfind(stage, 0) != 0 || id.size() < tail.size() ||
      id.compare(id.size() - tail.size(), tail.size(), tail) != 0) {
    return id;
  }
  const auto b = id.find(block);
  if (b == std::string::npos) return id;
  const std::string s = id.substr(stage.size(), b - stage.size());
  const std::string k = id.substr(b + block.size(), id.size() - tail.size() - b - block.size());
  if (s.empty() || k.empty() || k.find('.') != std::string::npos) return id;
  return s + "_" + k;
}

template <typename T>
std::vector<std::string> eligible_hidden_stages(const ModelGraph<T>& model) {
  std::vector<std::string> out;
  const auto convs = list_downsampling_convs(model);
  for (int s = 1;; ++s) {
    const std::string id = "stage" + std::to_string(s) + ".out";
    if (!model.aliases.count(id)) break;
    const std::size_t at = model.index_of(id);
    const bool later = std::any_of(convs.eligible.begin(), convs.eligible.end(),
                                   [&](const std::string& c) { return model.index_of(c) > at; });
    if (later) out.push_back(id);
  }
  return out;
}

#define SMOOTHSAL_MODEL_INSTANTIATE(T)                                                       \
  template struct ModelGraph<T>;                                                            \
  template void add_layer<T>(ModelGraph<T>&, LayerSpec);                                    \
  template void initialize_layer<T>(ModelGraph<T>&, const LayerSpec&, Rng&);                \
  template void initialize_all<T>(ModelGraph<T>&, std::uint64_t);                           \
  template ForwardResult<T> forward<T>(const ModelGraph<T>&, Tape<T>&, const Tensor<T>&,    \
                                       const ForwardOptions<T>&);                           \
  template Tensor<T> predict_logits<T>(const ModelGraph<T>&, const Tensor<T>&);             \
  template Tensor<T> probabilities<T>(HeadKind, const Tensor<T>&);                          \
  template DownsamplingConvs list_downsampling_convs<T>(const ModelGraph<T>&);              \
  template std::vector<std::string> parameterized_layers<T>(const ModelGraph<T>&);          \
  template ModelGraph<T> randomize_from_end<T>(const ModelGraph<T>&, std::string_view,      \
                                               std::uint64_t);                              \
  template std::vector<std::string> eligible_hidden_stages<T>(const ModelGraph<T>&);

SMOOTHSAL_MODEL_INSTANTIATE(float)
SMOOTHSAL_MODEL_INSTANTIATE(double)

}  // namespace smoothsal
