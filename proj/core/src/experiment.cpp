// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <set>

#include "smoothsal/denoise.hpp"
#include "smoothsal/errors.hpp"
#include "smoothsal/report.hpp"
#include "smoothsal/saliency.hpp"
#include "smoothsal/tensor_io.hpp"

namespace smoothsal {

#define SMOOTHSAL_EXPERIMENT_FIELDS(X) \
  X(command)                           \
  X(model)                             \
  X(dataset)                           \
  X(out)                               \
  X(mode)                              \
  X(modes)                             \
  X(method)                            \
  X(methods)                           \
  X(layers)                            \
  X(target)                            \
  X(ig_steps)                          \
  X(smoothgrad_n)                      \
  X(smoothgrad_sigma)                  \
  X(reduction)                         \
  X(steps)                             \
  X(seed)                              \
  X(literal_paper_rolls)               \
  X(split)                             \
  X(samples)                           \
  X(cut_points)                        \
  X(overlay_alpha)                     \
  X(write_curves)                      \
  X(epochs)                            \
  X(batch_size)                        \
  X(lr)                                \
  X(classes)                           \
  X(channels)                          \
  X(image_size)                        \
  X(count)                             \
  X(val_count)                         \
  X(widths)                            \
  X(blocks_per_stage)

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
#define X(name) j[#name] = cfg.name;
  SMOOTHSAL_EXPERIMENT_FIELDS(X)
#undef X
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> known{
#define X(name) #name,
      SMOOTHSAL_EXPERIMENT_FIELDS(X)
#undef X
  };
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown experiment config key '" + key + "'");
  }
  ExperimentConfig cfg;
  try {
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(cfg.name);
    SMOOTHSAL_EXPERIMENT_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return experiment_from_json(nlohmann::json::parse(read_file_bytes(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{
      "demo-checkerboard", "gen-dataset",   "train",         "train-surrogate", "attribute",
      "eval-tv",           "eval-insdel",   "eval-preddiff", "randomize-test"};
  return names;
}

namespace {

bool needs_model(const std::string& c) {
  return c != "demo-checkerboard" && c != "gen-dataset";
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), cfg.command) == names.end()) {
    throw ConfigError("unknown command '" + cfg.command + "'");
  }
  if (cfg.out.empty()) throw ConfigError("--out is required");
  if (needs_model(cfg.command) && cfg.model.empty()) throw ConfigError("--model is required");
  if (cfg.command != "demo-checkerboard" && cfg.command != "gen-dataset" && cfg.dataset.empty()) {
    throw ConfigError("--dataset is required");
  }
  hook_mode_from_string(cfg.mode);
  for (const auto& m : cfg.modes) hook_mode_from_string(m);
  saliency_method_from_string(cfg.method);
  for (const auto& m : cfg.methods) saliency_method_from_string(m);
  channel_reduction_from_string(cfg.reduction);
  if (cfg.ig_steps < 1) throw ConfigError("--ig-steps must be at least 1");
  if (cfg.smoothgrad_n < 0) throw ConfigError("--smoothgrad-n must be non-negative");
  if (!(cfg.smoothgrad_sigma >= 0.0)) throw ConfigError("--smoothgrad-sigma must be non-negative");
  if (cfg.steps < 1) throw ConfigError("--steps must be at least 1");
  if (cfg.samples < 1) throw ConfigError("--samples must be at least 1");
  if (cfg.split != "train" && cfg.split != "val") throw ConfigError("--split must be train or val");
  if (cfg.epochs == 0 || cfg.epochs < -1) throw ConfigError("--epochs must be positive");
  if (cfg.batch_size == 0 || cfg.batch_size < -1) throw ConfigError("--batch-size must be positive");
  if (!(cfg.lr > 0.0)) throw ConfigError("--lr must be positive");
  if (cfg.command == "gen-dataset") {
    if (cfg.classes < 2 || cfg.classes > 4) throw ConfigError("--classes must be between 2 and 4");
    if (cfg.count < 1 || cfg.val_count < 0) throw ConfigError("--count must be positive");
  }
  if (!(cfg.overlay_alpha >= 0.0 && cfg.overlay_alpha <= 1.0)) {
    throw ConfigError("overlay alpha must lie in [0, 1]");
  }
}

nlohmann::json run_command(const ExperimentConfig& cfg, std::ostream& log) {
  validate(cfg);
  const std::filesystem::path out(cfg.out);
  if (needs_model(cfg.command) && cfg.command != "train" &&
      !std::filesystem::exists(std::filesystem::path(cfg.model) / "manifest.json")) {
    throw ConfigError("model checkpoint not found: " + cfg.model);
  }
  if (!cfg.dataset.empty() && cfg.command != "gen-dataset" &&
      !std::filesystem::exists(std::filesystem::path(cfg.dataset) / "manifest.json")) {
    throw ConfigError("dataset not found: " + cfg.dataset);
  }
  std::filesystem::create_directories(out);
  write_json(out / "config.json", to_json(cfg));

  nlohmann::json summary;
  if (cfg.command == "demo-checkerboard") summary = cmd_demo_checkerboard(cfg, log);
  else if (cfg.command == "gen-dataset") summary = cmd_gen_dataset(cfg, log);
  else if (cfg.command == "train") summary = cmd_train(cfg, log);
  else if (cfg.command == "train-surrogate") summary = cmd_train_surrogate(cfg, log);
  else if (cfg.command == "attribute") summary = cmd_attribute(cfg, log);
  else if (cfg.command == "eval-tv") summary = cmd_eval_tv(cfg, log);
  else if (cfg.command == "eval-insdel") summary = cmd_eval_insdel(cfg, log);
  else if (cfg.command == "eval-preddiff") summary = cmd_eval_preddiff(cfg, log);
  else summary = cmd_randomize_test(cfg, log);

  summary["command"] = cfg.command;
  summary["seed"] = cfg.seed;
  summary["git_describe"] = std::string(git_describe());
  write_json(out / "summary.json", summary);
  return summary;
}

}  // namespace smoothsal
