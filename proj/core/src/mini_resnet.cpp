// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/errors.hpp"
#include "smoothsal/model.hpp"

namespace smoothsal {

nlohmann::json to_json(const MiniResNetConfig& cfg) {
  return {{"type", "mini_resnet"},
          {"input_channels", cfg.input_channels},
          {"image_size", cfg.image_size},
          {"classes", cfg.classes},
          {"widths", cfg.widths},
          {"blocks_per_stage", cfg.blocks_per_stage}};
}

MiniResNetConfig mini_resnet_config_from_json(const nlohmann::json& j) {
  MiniResNetConfig cfg;
  cfg.input_channels = j.value("input_channels", cfg.input_channels);
  cfg.image_size = j.value("image_size", cfg.image_size);
  cfg.classes = j.value("classes", cfg.classes);
  cfg.widths = j.value("widths", cfg.widths);
  cfg.blocks_per_stage = j.value("blocks_per_stage", cfg.blocks_per_stage);
  return cfg;
}

namespace {

LayerSpec conv_spec(std::string id, std::string input, std::int64_t cin, std::int64_t cout,
                    int kernel, int stride, int padding) {
  LayerSpec s;
  s.id = std::move(id);
  s.kind = LayerKind::conv;
  s.inputs = {std::move(input)};
  s.in_channels = cin;
  s.out_channels = cout;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec simple_spec(std::string id, LayerKind kind, std::vector<std::string> inputs,
                      std::int64_t channels = 0) {
  LayerSpec s;
  s.id = std::move(id);
  s.kind = kind;
  s.inputs = std::move(inputs);
  s.in_channels = channels;
  s.out_channels = channels;
  return s;
}

}  // namespace

template <typename T>
ModelGraph<T> build_mini_resnet(const MiniResNetConfig& cfg, std::uint64_t seed) {
  if (cfg.input_channels != 1 && cfg.input_channels != 3) {
    throw ConfigError("mini-ResNet input must have 1 or 3 channels");
  }
  if (cfg.classes < 1) throw ConfigError("mini-ResNet needs at least one class");
  if (cfg.widths.empty() || cfg.blocks_per_stage < 1) {
    throw ConfigError("mini-ResNet needs at least one stage and one block per stage");
  }
  const int factor = 1 << (1 + cfg.widths.size());
  if (cfg.image_size < factor || cfg.image_size % factor != 0) {
    throw ConfigError("image size " + std::to_string(cfg.image_size) + " is not divisible by " +
                      std::to_string(factor));
  }

  ModelGraph<T> m;
  m.input = {cfg.input_channels, cfg.image_size, cfg.image_size};
  m.classes = cfg.classes;
  m.architecture = to_json(cfg);

  const std::int64_t stem_width = cfg.widths.front();
  LayerSpec stem = conv_spec("stem", std::string(kInputLayer), cfg.input_channels, stem_width, 3, 2, 1);
  stem.never_replace = true;
  add_layer(m, stem);
  add_layer(m, simple_spec("stem.bn", LayerKind::frozen_batchnorm, {"stem"}, stem_width));
  add_layer(m, simple_spec("stem.relu", LayerKind::relu, {"stem.bn"}));

  std::string prev = "stem.relu";
  std::int64_t cin = stem_width;
  std::vector<std::string> zero_scale;
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    const std::int64_t cout = cfg.widths[s];
    const std::string stage = "stage" + std::to_string(s + 1);
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      const std::string p = stage + ".block" + std::to_string(b + 1);
      const bool entry = b == 0;
      add_layer(m, conv_spec(p + ".conv1", prev, cin, cout, 3, entry ? 2 : 1, 1));
      add_layer(m, simple_spec(p + ".bn1", LayerKind::frozen_batchnorm, {p + ".conv1"}, cout));
      add_layer(m, simple_spec(p + ".relu1", LayerKind::relu, {p + ".bn1"}));
      add_layer(m, conv_spec(p + ".conv2", p + ".relu1", cout, cout, 3, 1, 1));
      add_layer(m, simple_spec(p + ".bn2", LayerKind::frozen_batchnorm, {p + ".conv2"}, cout));
      zero_scale.push_back(p + ".bn2");

      std::string skip = prev;
      if (entry) {
        add_layer(m, simple_spec(p + ".skip_pool", LayerKind::avgpool2x, {skip}, cin));
        skip = p + ".skip_pool";
      }
      if (cin != cout) {
        add_layer(m, conv_spec(p + ".skip_conv", skip, cin, cout, 1, 1, 0));
        skip = p + ".skip_conv";
      }
      add_layer(m, simple_spec(p + ".add", LayerKind::residual_add, {p + ".bn2", skip}));
      add_layer(m, simple_spec(p + ".out", LayerKind::relu, {p + ".add"}));
      prev = p + ".out";
      cin = cout;
    }
    m.aliases[stage + ".out"] = prev;
  }

  add_layer(m, simple_spec("pool", LayerKind::global_avg_pool, {prev}));
  LayerSpec fc = simple_spec("fc", LayerKind::linear, {"pool"});
  fc.in_channels = cin;
  fc.out_channels = cfg.classes;
  fc.bias = true;
  add_layer(m, fc);

  initialize_all(m, seed);
  // Residual branches start as identity maps.
  for (const auto& id : zero_scale) {
    auto& scale = m.param(id, "scale");
    std::fill(scale.data().begin(), scale.data().end(), T(0));
  }
  m.validate();
  return m;
}

template ModelGraph<float> build_mini_resnet<float>(const MiniResNetConfig&, std::uint64_t);
template ModelGraph<double> build_mini_resnet<double>(const MiniResNetConfig&, std::uint64_t);

}  // namespace smoothsal
