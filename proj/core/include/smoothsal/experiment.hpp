// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration and the command implementations behind the CLI.
// Every command writes <out>/config.json holding the effective configuration;
// re-running that file reproduces the command's .stns and CSV outputs byte for
// byte.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace smoothsal {

struct ExperimentConfig {
  std::string command;
  std::string model;    // checkpoint directory
  std::string dataset;  // dataset directory
  std::string out;      // report directory

  std::string mode = "original";
  std::vector<std::string> modes;  // eval commands; empty picks the command default
  std::string method = "grad";
  std::vector<std::string> methods;
  std::vector<std::string> layers;  // empty picks the command default
  std::int64_t target = -1;         // -1: the sample's label
  int ig_steps = 32;
  int smoothgrad_n = 0;  // 0 disables SmoothGrad
  double smoothgrad_sigma = 0.2;
  std::string reduction = "mean_abs";
  int steps = 100;  // insertion/deletion steps
  std::uint64_t seed = 0;
  bool literal_paper_rolls = false;

  std::string split = "val";
  std::int64_t samples = 100;
  std::vector<std::string> cut_points;  // randomize-test; empty: defaults
  double overlay_alpha = 0.5;
  bool write_curves = false;

  int epochs = -1;      // -1: 20 for train, 10 for train-surrogate
  int batch_size = -1;  // -1: 32 for train, 64 for train-surrogate
  double lr = 1e-3;

  int classes = 4;
  int channels = 3;
  int image_size = 64;
  std::int64_t count = 4000;
  std::int64_t val_count = 1000;
  std::vector<int> widths{16, 32, 64, 128};
  int blocks_per_stage = 2;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are a ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Throws ConfigError on an invalid combination for cfg.command.
void validate(const ExperimentConfig& cfg);

const std::vector<std::string>& command_names();

// Runs cfg.command and returns its JSON summary (also written to
// <out>/summary.json). Progress lines go to `log`.
nlohmann::json run_command(const ExperimentConfig& cfg, std::ostream& log);

nlohmann::json cmd_demo_checkerboard(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_gen_dataset(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_train(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_train_surrogate(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_attribute(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_eval_tv(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_eval_insdel(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_eval_preddiff(const ExperimentConfig& cfg, std::ostream& log);
nlohmann::json cmd_randomize_test(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace smoothsal
