// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smoothsal/errors.hpp"
#include "smoothsal/experiment.hpp"

namespace {

// Each flag applies to the config only when given, so flags override --config.
class Overrides {
 public:
  explicit Overrides(CLI::App& app) : app_(app) {}

  template <typename V>
  void add(const std::string& flag, V smoothsal::ExperimentConfig::*field, const std::string& help) {
    auto value = std::make_shared<V>();
    CLI::Option* opt = app_.add_option(flag, *value, help);
    if constexpr (std::is_same_v<V, std::vector<std::string>>) opt->delimiter(',');
    appliers_.push_back([opt, value, field](smoothsal::ExperimentConfig& cfg) {
      if (opt->count() > 0) cfg.*field = *value;
    });
  }

  void add_switch(const std::string& flag, bool smoothsal::ExperimentConfig::*field, const std::string& help) {
    CLI::Option* opt = app_.add_flag(flag, help);
    appliers_.push_back([opt, field](smoothsal::ExperimentConfig& cfg) {
      if (opt->count() > 0) cfg.*field = true;
    });
  }

  void apply(smoothsal::ExperimentConfig& cfg) const {
    for (const auto& f : appliers_) f(cfg);
  }

 private:
  CLI::App& app_;
  std::vector<std::function<void(smoothsal::ExperimentConfig&)>> appliers_;
};

}  // namespace

int main(int argc, char** argv) {
  using smoothsal::ExperimentConfig;
  CLI::App app{"Checkerboard-free saliency maps for strided convolutional networks"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON experiment config; flags override its values");

  Overrides o(app);
  o.add("--model", &ExperimentConfig::model, "checkpoint directory");
  o.add("--dataset", &ExperimentConfig::dataset, "dataset directory");
  o.add("--out", &ExperimentConfig::out, "output directory");
  o.add("--mode", &ExperimentConfig::mode, "original|surrogate|backward|forward");
  o.add("--modes", &ExperimentConfig::modes, "comma-separated modes for eval commands");
  o.add("--method", &ExperimentConfig::method, "grad|ig|deeplift|gradcam");
  o.add("--methods", &ExperimentConfig::methods, "comma-separated methods for eval commands");
  o.add("--layer", &ExperimentConfig::layers, "layer id(s), comma-separated; 'input' for the image");
  o.add("--target", &ExperimentConfig::target, "target class; -1 uses the sample label");
  o.add("--ig-steps", &ExperimentConfig::ig_steps, "Integrated Gradients steps");
  o.add("--smoothgrad-n", &ExperimentConfig::smoothgrad_n, "SmoothGrad samples; 0 disables");
  o.add("--smoothgrad-sigma", &ExperimentConfig::smoothgrad_sigma, "SmoothGrad noise std");
  o.add("--reduction", &ExperimentConfig::reduction, "channel reduction: mean_abs|mean|sum");
  o.add("--steps", &ExperimentConfig::steps, "insertion/deletion steps");
  o.add("--seed", &ExperimentConfig::seed, "root seed");
  o.add_switch("--literal-paper-rolls", &ExperimentConfig::literal_paper_rolls,
               "backward hook uses the forward roll offsets unchanged");
  o.add("--split", &ExperimentConfig::split, "train|val");
  o.add("--samples", &ExperimentConfig::samples, "number of evaluation samples");
  o.add("--cut-points", &ExperimentConfig::cut_points, "randomization cut points, comma-separated");
  o.add("--overlay-alpha", &ExperimentConfig::overlay_alpha, "overlay opacity");
  o.add_switch("--write-curves", &ExperimentConfig::write_curves, "write insertion/deletion curves");
  o.add("--epochs", &ExperimentConfig::epochs, "training epochs");
  o.add("--batch-size", &ExperimentConfig::batch_size, "training batch size");
  o.add("--lr", &ExperimentConfig::lr, "Adam learning rate");
  o.add("--classes", &ExperimentConfig::classes, "dataset classes (2..4)");
  o.add("--channels", &ExperimentConfig::channels, "dataset image channels (1 or 3)");
  o.add("--image-size", &ExperimentConfig::image_size, "dataset image side length");
  o.add("--count", &ExperimentConfig::count, "training images");
  o.add("--val-count", &ExperimentConfig::val_count, "validation images");
  o.add("--widths", &ExperimentConfig::widths, "stage widths");
  o.add("--blocks-per-stage", &ExperimentConfig::blocks_per_stage, "residual blocks per stage");

  for (const auto& name : smoothsal::command_names()) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : smoothsal::load_experiment(config_path);
    o.apply(cfg);
    cfg.command = app.get_subcommands().front()->get_name();
    smoothsal::run_command(cfg, std::cout);
  } catch (const smoothsal::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const smoothsal::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const smoothsal::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
