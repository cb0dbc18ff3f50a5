// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <memory>
#include <ostream>

#include "smoothsal/checkpoint.hpp"
#include "smoothsal/dataset.hpp"
#include "smoothsal/denoise.hpp"
#include "smoothsal/errors.hpp"
#include "smoothsal/experiment.hpp"
#include "smoothsal/image_io.hpp"
#include "smoothsal/metrics.hpp"
#include "smoothsal/report.hpp"
#include "smoothsal/saliency.hpp"
#include "smoothsal/tensor_io.hpp"
#include "smoothsal/train.hpp"

namespace smoothsal {

namespace fs = std::filesystem;
using F = float;

namespace {

RollSet rolls_for(const ExperimentConfig& cfg) { return cfg.literal_paper_rolls ? RollSet::literal() : RollSet{}; }

std::string num(double v) { return format_number(v); }

// Model plus lazily loaded surrogates; hands out views by mode.
class Workspace {
 public:
  explicit Workspace(const ExperimentConfig& cfg)
      : cfg_(cfg), model_(load_checkpoint<F>(cfg.model)), rolls_(rolls_for(cfg)) {}

  const ModelGraph<F>& model() const { return model_; }

  ModelView<F> view(HookMode mode) {
    if (mode == HookMode::surrogate && !surrogates_) {
      auto loaded = std::make_shared<SurrogateMap<F>>(load_surrogates<F>(cfg_.model));
      if (loaded->empty()) {
        throw ConfigError("no trained surrogates under " + cfg_.model + "/surrogates; run train-surrogate");
      }
      surrogates_ = loaded;
    }
    return attach(model_, mode, rolls_, surrogates_);
  }

 private:
  const ExperimentConfig& cfg_;
  ModelGraph<F> model_;
  RollSet rolls_;
  std::shared_ptr<const SurrogateMap<F>> surrogates_;
};

LabeledImages<F> evaluation_split(const ExperimentConfig& cfg, const Dataset& data) {
  const LabeledImages<F>& split = cfg.split == "train" ? data.train : data.val;
  if (split.size() == 0) throw ConfigError("dataset split '" + cfg.split + "' is empty");
  return split.head(cfg.samples);
}

std::int64_t target_for(const ExperimentConfig& cfg, const ModelGraph<F>& model, std::int64_t label) {
  if (cfg.target >= 0) return cfg.target;
  return model.classes == 1 ? 0 : label;
}

AttributionRequest request_for(const ExperimentConfig& cfg, SaliencyMethod method, const std::string& layer,
                               std::int64_t target, std::int64_t sample) {
  AttributionRequest req;
  req.method = method;
  req.layer = layer;
  req.target = target;
  req.ig_steps = cfg.ig_steps;
  req.reduction = channel_reduction_from_string(cfg.reduction);
  if (cfg.smoothgrad_n > 0) {
    req.smoothgrad = SmoothGradConfig{cfg.smoothgrad_n, cfg.smoothgrad_sigma, smoothgrad_seed(cfg.seed, sample)};
  }
  return req;
}

std::vector<HookMode> modes_of(const ExperimentConfig& cfg, std::vector<std::string> fallback) {
  const auto& names = cfg.modes.empty() ? fallback : cfg.modes;
  std::vector<HookMode> out;
  for (const auto& n : names) out.push_back(hook_mode_from_string(n));
  return out;
}

std::vector<SaliencyMethod> methods_of(const ExperimentConfig& cfg, std::vector<std::string> fallback) {
  const auto& names = cfg.methods.empty() ? fallback : cfg.methods;
  std::vector<SaliencyMethod> out;
  for (const auto& n : names) out.push_back(saliency_method_from_string(n));
  return out;
}

std::vector<std::string> hidden_layers(const ExperimentConfig& cfg, const ModelGraph<F>& model) {
  if (!cfg.layers.empty()) return cfg.layers;
  auto layers = eligible_hidden_stages(model);
  if (layers.empty()) throw ConfigError("model has no hidden stage upstream of a replaceable conv");
  return layers;
}

std::string display_of(const ModelGraph<F>& model, const std::string& layer) {
  if (layer == kInputLayer) return std::string(kInputLayer);
  return display_layer_name(model.resolve(layer));
}

nlohmann::json layer_name_map(const ModelGraph<F>& model, const std::vector<std::string>& layers) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& l : layers) {
    j[l] = {{"id", l == kInputLayer ? l : model.resolve(l)}, {"display", display_of(model, l)}};
  }
  return j;
}

Tensor<F> sample_image(const LabeledImages<F>& split, std::int64_t i) { return slice_batch(split.images, i, 1); }

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json cmd_demo_checkerboard(const ExperimentConfig& cfg, std::ostream& log) {
  constexpr std::int64_t kSize = 16;
  const fs::path out(cfg.out);
  const RollSet rolls = rolls_for(cfg);
  const Tensor<double> x = Tensor<double>::ones({1, 1, kSize, kSize});
  const Tensor<double> k = Tensor<double>::from({1, 1, 2, 2}, {1, 1, 1, -1});
  const Conv2dGeometry geom{2, 0};

  Tensor<double> grad;
  {
    Tape<double> tape;
    Var<double> xv = tape.leaf(x, true);
    tape.backward(sum(conv2d(xv, tape.leaf(k), std::optional<Var<double>>{}, geom)));
    grad = tape.grad(xv).reshaped({kSize, kSize});
  }
  const Tensor<double> hooked = backward_hook(grad, rolls);
  Tensor<double> forward_grad;
  {
    Tape<double> tape;
    Var<double> xv = tape.leaf(x, true);
    tape.backward(sum(forward_hook(xv, tape.leaf(k), std::optional<Var<double>>{}, geom, rolls)));
    forward_grad = tape.grad(xv).reshaped({kSize, kSize});
  }

  nlohmann::json artifacts = nlohmann::json::array();
  nlohmann::json spreads = nlohmann::json::object();
  auto emit = [&](const std::string& name, const Tensor<double>& t) {
    write_stns(out / (name + ".stns"), t);
    write_pgm(out / (name + ".pgm"), to_gray(t));
    artifacts.push_back(name + ".stns");
    artifacts.push_back(name + ".pgm");
    const double spread = phase_spread(t);
    spreads[name] = spread;
    log << name << ": phase_spread = " << num(spread) << "\n";
  };
  emit("gradient", grad);
  emit("backward_hook", hooked);
  emit("forward_hook", forward_grad);

  nlohmann::json manifest{{"artifacts", artifacts},
                          {"kernel", {{1, 1}, {1, -1}}},
                          {"size", kSize},
                          {"stride", 2},
                          {"literal_paper_rolls", cfg.literal_paper_rolls}};
  write_json(out / "manifest.json", manifest);
  return {{"phase_spread", spreads}, {"artifacts", artifacts}};
}

nlohmann::json cmd_gen_dataset(const ExperimentConfig& cfg, std::ostream& log) {
  ShapesConfig sc;
  sc.classes = cfg.classes;
  sc.channels = cfg.channels;
  sc.image_size = cfg.image_size;
  sc.train_count = cfg.count;
  sc.val_count = cfg.val_count;
  sc.seed = cfg.seed;
  const fs::path dir = cfg.dataset.empty() ? fs::path(cfg.out) : fs::path(cfg.dataset);
  const Dataset d = generate_shapes(sc);
  save_dataset(d, dir);
  log << "wrote " << d.train.size() << " train and " << d.val.size() << " val images to " << dir.string() << "\n";
  return {{"dataset", d.manifest}, {"path", dir.string()}};
}

nlohmann::json cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  const Dataset data = load_dataset(cfg.dataset);
  MiniResNetConfig mc;
  mc.input_channels = data.manifest.at("channels").get<int>();
  mc.image_size = data.manifest.at("image_size").get<int>();
  mc.classes = data.classes();
  mc.widths = cfg.widths;
  mc.blocks_per_stage = cfg.blocks_per_stage;
  ModelGraph<F> model = build_mini_resnet<F>(mc, stream_seed(cfg.seed, "init"));

  TrainOptions opt;
  opt.adam.lr = cfg.lr;
  opt.batch_size = cfg.batch_size > 0 ? cfg.batch_size : 32;
  opt.epochs = cfg.epochs > 0 ? cfg.epochs : 20;
  opt.seed = cfg.seed;
  opt.on_epoch = [&](const EpochRecord& r) {
    log << "epoch " << r.epoch << ": loss " << num(r.loss) << ", accuracy " << num(r.accuracy) << "\n";
  };
  const TrainingLog tl = train(model, data.train, opt);

  const ModelView<F> view = attach(model, HookMode::original);
  const double train_acc = accuracy(view, data.train);
  const double val_acc = data.val.size() > 0 ? accuracy(view, data.val) : 0.0;
  model.metadata = {{"seed", cfg.seed},
                    {"training", to_json(tl)},
                    {"optimizer", {{"name", "adam"}, {"lr", cfg.lr}, {"batch_size", opt.batch_size}}},
                    {"dataset", data.manifest},
                    {"train_accuracy", train_acc},
                    {"val_accuracy", val_acc}};
  save_checkpoint(model, cfg.model);

  CsvTable t({"epoch", "loss", "accuracy"});
  for (const auto& e : tl.epochs) t.add_row({std::to_string(e.epoch), num(e.loss), num(e.accuracy)});
  t.write(fs::path(cfg.out) / "training_log.csv");
  log << "train accuracy " << num(train_acc) << ", val accuracy " << num(val_acc) << "\n";
  return {{"train_accuracy", train_acc}, {"val_accuracy", val_acc}, {"training", to_json(tl)}};
}

nlohmann::json cmd_train_surrogate(const ExperimentConfig& cfg, std::ostream& log) {
  const ModelGraph<F> model = load_checkpoint<F>(cfg.model);
  const Dataset data = load_dataset(cfg.dataset);
  SurrogateTrainOptions opt;
  opt.adam.lr = cfg.lr;
  opt.epochs = cfg.epochs > 0 ? cfg.epochs : 10;
  opt.batch_size = cfg.batch_size > 0 ? cfg.batch_size : 64;
  opt.seed = cfg.seed;
  opt.layers = cfg.layers;
  opt.on_epoch = [&](const std::string& layer, int epoch, double loss) {
    log << layer << " epoch " << epoch << ": L1 " << num(loss) << "\n";
  };
  const SurrogateMap<F> paths = train_surrogates(model, data.train, opt);
  save_surrogates(paths, cfg.model);

  CsvTable t({"layer", "epoch", "l1"});
  nlohmann::json layers = nlohmann::json::object();
  for (const auto& [id, p] : paths) {
    for (std::size_t e = 0; e < p.epoch_loss.size(); ++e) t.add_row({id, std::to_string(e), num(p.epoch_loss[e])});
    layers[id] = {{"final_l1", p.final_l1}, {"warning", p.warning}};
    if (!p.warning.empty()) log << "warning: " << id << ": " << p.warning << "\n";
  }
  t.write(fs::path(cfg.out) / "surrogate_log.csv");
  return {{"layers", layers}, {"epochs", opt.epochs}, {"lr", cfg.lr}, {"batch_size", opt.batch_size}};
}

nlohmann::json cmd_attribute(const ExperimentConfig& cfg, std::ostream& log) {
  Workspace ws(cfg);
  const auto& model = ws.model();
  const Dataset data = load_dataset(cfg.dataset);
  const LabeledImages<F> split = evaluation_split(cfg, data);
  const HookMode mode = hook_mode_from_string(cfg.mode);
  const ModelView<F> view = ws.view(mode);
  const SaliencyMethod method = saliency_method_from_string(cfg.method);
  std::vector<std::string> layers = cfg.layers;
  if (layers.empty()) layers = {method == SaliencyMethod::gradcam ? model.last_spatial_layer() : std::string(kInputLayer)};
  const fs::path maps = fs::path(cfg.out) / "maps";
  const auto mean = data.channel_mean();
  const auto sd = data.channel_std();

  CsvTable t({"sample", "label", "target", "layer", "display", "tv", "phase_spread"});
  for (std::int64_t i = 0; i < split.size(); ++i) {
    const Tensor<F> x = sample_image(split, i);
    const std::int64_t label = split.labels[static_cast<std::size_t>(i)];
    const std::int64_t target = target_for(cfg, model, label);
    const Tensor<F> shown = denormalize(x.reshaped({x.dim(1), x.dim(2), x.dim(3)}), mean, sd);
    for (const auto& layer : layers) {
      const SaliencyMap<F> m = attribute(view, x, request_for(cfg, method, layer, target, i));
      const std::string display = display_of(model, m.layer == kInputLayer ? layer : m.layer);
      const std::string stem = std::to_string(i) + "_" + display;
      write_stns(maps / (stem + ".stns"), m.raw);
      write_pgm(maps / (stem + ".pgm"), to_gray(m.rendered));
      write_png(maps / (stem + "_overlay.png"), overlay(shown, m.rendered, cfg.overlay_alpha));
      const bool even = m.reduced.dim(0) % 2 == 0 && m.reduced.dim(1) % 2 == 0;
      const bool tv_ok = m.raw.dim(1) >= 2 && m.raw.dim(2) >= 2;
      t.add_row({std::to_string(i), std::to_string(label), std::to_string(target), m.layer, display,
                 tv_ok ? num(total_variation(m.raw)) : "nan", even ? num(phase_spread(m.reduced)) : "nan"});
    }
  }
  t.write(fs::path(cfg.out) / "attribution.csv");
  log << "wrote " << t.rows() << " maps to " << maps.string() << "\n";
  return {{"mode", std::string(to_string(mode))},
          {"method", std::string(to_string(method))},
          {"layers", layer_name_map(model, layers)},
          {"samples", split.size()},
          {"reduction", cfg.reduction},
          {"smoothgrad", cfg.smoothgrad_n > 0}};
}

nlohmann::json cmd_eval_tv(const ExperimentConfig& cfg, std::ostream& log) {
  Workspace ws(cfg);
  const auto& model = ws.model();
  const Dataset data = load_dataset(cfg.dataset);
  const LabeledImages<F> split = evaluation_split(cfg, data);
  const auto modes = modes_of(cfg, {"original", "surrogate", "backward", "forward"});
  const auto methods = methods_of(cfg, {"grad", "ig", "deeplift"});
  const auto layers = hidden_layers(cfg, model);

  // mean TV keyed by (mode, method, layer)
  std::map<std::tuple<std::string, std::string, std::string>, Summary> means;
  CsvTable t({"mode", "method", "layer", "display", "sample", "tv"});
  for (const HookMode mode : modes) {
    const ModelView<F> view = ws.view(mode);
    const std::string mname(to_string(mode));
    std::map<std::pair<std::string, std::string>, std::vector<double>> values;
    for (std::int64_t i = 0; i < split.size(); ++i) {
      const Tensor<F> x = sample_image(split, i);
      const std::int64_t target = target_for(cfg, model, split.labels[static_cast<std::size_t>(i)]);
      for (const SaliencyMethod method : methods) {
        for (const auto& layer : layers) {
          const SaliencyMap<F> m = attribute(view, x, request_for(cfg, method, layer, target, i));
          const double tv = total_variation(m.raw);
          values[{std::string(to_string(method)), layer}].push_back(tv);
          t.add_row({mname, std::string(to_string(method)), layer, display_of(model, layer), std::to_string(i), num(tv)});
        }
      }
    }
    for (const auto& [key, v] : values) means[{mname, key.first, key.second}] = summarize(v);
    log << "mode " << mname << " done\n";
  }
  t.write(fs::path(cfg.out) / "tv.csv");

  nlohmann::json summary_tv = nlohmann::json::array();
  for (const auto& [key, s] : means) {
    summary_tv.push_back({{"mode", std::get<0>(key)}, {"method", std::get<1>(key)}, {"layer", std::get<2>(key)},
                          {"tv", to_json(s)}});
  }
  nlohmann::json reductions = nlohmann::json::array();
  CsvTable r({"method", "layer", "display", "mode", "mean_tv", "reduction_pct"});
  const bool has_original = std::find(modes.begin(), modes.end(), HookMode::original) != modes.end();
  if (has_original) {
    for (const SaliencyMethod method : methods) {
      const std::string meth(to_string(method));
      for (const HookMode mode : modes) {
        if (mode == HookMode::original) continue;
        const std::string mname(to_string(mode));
        double avg = 0.0;
        for (const auto& layer : layers) {
          const double base = means.at({"original", meth, layer}).mean;
          const double cur = means.at({mname, meth, layer}).mean;
          const double pct = base > 0 ? (base - cur) / base * 100.0 : 0.0;
          avg += pct;
          r.add_row({meth, layer, display_of(model, layer), mname, num(cur), num(pct)});
          reductions.push_back({{"method", meth}, {"layer", layer}, {"mode", mname}, {"reduction_pct", pct}});
        }
        avg /= static_cast<double>(layers.size());
        r.add_row({meth, "average", "average", mname, "", num(avg)});
        reductions.push_back({{"method", meth}, {"layer", "average"}, {"mode", mname}, {"reduction_pct", avg}});
      }
    }
    r.write(fs::path(cfg.out) / "tv_reduction.csv");
  }
  return {{"tv", summary_tv},
          {"reduction", reductions},
          {"layers", layer_name_map(model, layers)},
          {"samples", split.size()},
          {"reduction_mode", cfg.reduction},
          {"smoothgrad", cfg.smoothgrad_n > 0},
          {"ig_steps", cfg.ig_steps}};
}

nlohmann::json cmd_eval_insdel(const ExperimentConfig& cfg, std::ostream& log) {
  Workspace ws(cfg);
  const auto& model = ws.model();
  const Dataset data = load_dataset(cfg.dataset);
  const LabeledImages<F> split = evaluation_split(cfg, data);
  const auto modes = modes_of(cfg, {cfg.mode});
  const auto methods = methods_of(cfg, {cfg.method});
  const auto layers = hidden_layers(cfg, model);
  InsDelConfig ic;
  ic.steps = cfg.steps;

  CsvTable t({"mode", "method", "layer", "display", "sample", "target", "deletion_auc", "insertion_auc"});
  CsvTable curves({"mode", "method", "layer", "sample", "kind", "fraction", "probability"});
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const HookMode mode : modes) {
    const ModelView<F> view = ws.view(mode);
    const std::string mname(to_string(mode));
    for (std::int64_t i = 0; i < split.size(); ++i) {
      const Tensor<F> x = sample_image(split, i);
      const std::int64_t target = target_for(cfg, model, split.labels[static_cast<std::size_t>(i)]);
      for (const auto& layer : layers) {
        auto score = [&](const std::string& meth, const Tensor<F>& rendered) {
          const Curve del = deletion_score(view, x, rendered, target, ic);
          const Curve ins = insertion_score(view, x, rendered, target, ic);
          t.add_row({mname, meth, layer, display_of(model, layer), std::to_string(i), std::to_string(target),
                     num(del.auc), num(ins.auc)});
          auto& slot = acc[{mname, meth, layer}];
          slot.first.push_back(del.auc);
          slot.second.push_back(ins.auc);
          if (cfg.write_curves) {
            for (std::size_t k = 0; k < del.fraction.size(); ++k) {
              curves.add_row({mname, meth, layer, std::to_string(i), "deletion", num(del.fraction[k]), num(del.probability[k])});
            }
            for (std::size_t k = 0; k < ins.fraction.size(); ++k) {
              curves.add_row({mname, meth, layer, std::to_string(i), "insertion", num(ins.fraction[k]), num(ins.probability[k])});
            }
          }
        };
        for (const SaliencyMethod method : methods) {
          score(std::string(to_string(method)),
                attribute(view, x, request_for(cfg, method, layer, target, i)).rendered);
        }
        const std::string resolved = layer == kInputLayer ? layer : model.resolve(layer);
        const std::uint64_t seed = stream_seed(cfg.seed, "noise-baseline/" + resolved + "/" + std::to_string(i));
        score("noise", noise_saliency(model, resolved, seed));
      }
    }
    log << "mode " << mname << " done\n";
  }
  t.write(fs::path(cfg.out) / "insdel.csv");
  if (cfg.write_curves) curves.write(fs::path(cfg.out) / "curves.csv");

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, v] : acc) {
    rows.push_back({{"mode", std::get<0>(key)}, {"method", std::get<1>(key)}, {"layer", std::get<2>(key)},
                    {"deletion_auc", to_json(summarize(v.first))}, {"insertion_auc", to_json(summarize(v.second))}});
  }
  return {{"results", rows}, {"config", to_json(ic)}, {"layers", layer_name_map(model, layers)},
          {"samples", split.size()}, {"smoothgrad", cfg.smoothgrad_n > 0}};
}

nlohmann::json cmd_eval_preddiff(const ExperimentConfig& cfg, std::ostream& log) {
  Workspace ws(cfg);
  const auto& model = ws.model();
  const Dataset data = load_dataset(cfg.dataset);
  const LabeledImages<F> split = evaluation_split(cfg, data);
  const auto modes = modes_of(cfg, {"surrogate", "forward", "backward"});
  std::vector<std::int64_t> targets;
  for (auto l : split.labels) targets.push_back(target_for(cfg, model, l));

  const ModelView<F> original = ws.view(HookMode::original);
  const double base_acc = accuracy(original, split);
  CsvTable per({"mode", "sample", "label", "all_classes", "target_class"});
  CsvTable accs({"mode", "accuracy"});
  accs.add_row({"original", num(base_acc)});
  nlohmann::json results = nlohmann::json::array();
  for (const HookMode mode : modes) {
    const ModelView<F> variant = ws.view(mode);
    const std::string mname(to_string(mode));
    const PredDiffReport r = prediction_difference(original, variant, split.images, targets);
    for (std::size_t i = 0; i < r.all_classes.size(); ++i) {
      per.add_row({mname, std::to_string(i), std::to_string(split.labels[i]), num(r.all_classes[i]), num(r.target_class[i])});
    }
    const double acc = accuracy(variant, split);
    accs.add_row({mname, num(acc)});
    results.push_back({{"mode", mname},
                       {"all_classes", to_json(r.all_summary)},
                       {"target_class", to_json(r.target_summary)},
                       {"accuracy", acc},
                       {"accuracy_drop_points", (base_acc - acc) * 100.0}});
    log << mname << ": all-classes " << num(r.all_summary.mean) << ", accuracy " << num(acc) << "\n";
  }
  per.write(fs::path(cfg.out) / "preddiff.csv");
  accs.write(fs::path(cfg.out) / "accuracy.csv");
  return {{"original_accuracy", base_acc}, {"results", results}, {"samples", split.size()}};
}

nlohmann::json cmd_randomize_test(const ExperimentConfig& cfg, std::ostream& log) {
  const ModelGraph<F> model = load_checkpoint<F>(cfg.model);
  const Dataset data = load_dataset(cfg.dataset);
  const LabeledImages<F> split = evaluation_split(cfg, data);
  std::vector<std::int64_t> targets;
  for (auto l : split.labels) targets.push_back(target_for(cfg, model, l));

  RandomizationConfig rc;
  rc.cut_points = cfg.cut_points.empty() ? default_cut_points(model) : cfg.cut_points;
  const std::string layer = cfg.layers.empty() ? std::string(kInputLayer) : cfg.layers.front();
  rc.request = request_for(cfg, saliency_method_from_string(cfg.method), layer, 0, 0);
  rc.insdel.steps = cfg.steps;
  rc.mode = hook_mode_from_string(cfg.mode);
  rc.rolls = rolls_for(cfg);
  rc.seed = cfg.seed;
  const RandomizationReport rep = randomization_suite(model, split.images, targets, rc);

  CsvTable t({"cut", "layer", "sample", "deletion_auc", "insertion_auc"});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rep.rows) {
    for (std::size_t i = 0; i < row.deletion.size(); ++i) {
      t.add_row({row.cut, row.layer, std::to_string(i), num(row.deletion[i]), num(row.insertion[i])});
    }
    rows.push_back({{"cut", row.cut},
                    {"layer", row.layer},
                    {"deletion_auc", to_json(row.deletion_summary)},
                    {"insertion_auc", to_json(row.insertion_summary)}});
    log << row.cut << ": deletion " << num(row.deletion_summary.mean) << ", insertion "
        << num(row.insertion_summary.mean) << "\n";
  }
  t.write(fs::path(cfg.out) / "randomization.csv");
  return {{"rows", rows},
          {"method", cfg.method},
          {"layer", layer},
          {"mode", cfg.mode},
          {"samples", split.size()},
          {"insdel", to_json(rc.insdel)}};
}

}  // namespace smoothsal
