// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smoothsal/errors.hpp"
#include "smoothsal/train.hpp"

namespace smoothsal {

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

nlohmann::json to_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

// ---------------------------------------------------------------------------
// Noise measures
// ---------------------------------------------------------------------------

namespace {

struct Planes {
  std::int64_t c;
  std::int64_t h;
  std::int64_t w;
};

Planes planes_of(const Shape& s, const char* what) {
  if (s.size() == 2) return {1, s[0], s[1]};
  if (s.size() == 3) return {s[0], s[1], s[2]};
  throw DimensionError(std::string(what) + " expects h x w or C x h x w, got " + shape_string(s));
}

}  // namespace

template <typename T>
Tensor<T> zero_mean_channels(const Tensor<T>& raw) {
  const Planes p = planes_of(raw.shape(), "zero_mean_channels");
  const std::int64_t n = p.h * p.w;
  Tensor<T> out = raw;
  for (std::int64_t c = 0; c < p.c; ++c) {
    T* z = out.data().data() + c * n;
    double mu = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mu += z[i];
    mu /= static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) z[i] = static_cast<T>(z[i] - mu);
  }
  return out;
}

template <typename T>
double anisotropic_tv(std::span<const T> plane, std::int64_t h, std::int64_t w) {
  double total = 0.0;
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j + 1 < w; ++j) {
      total += std::abs(static_cast<double>(plane[i * w + j + 1]) - plane[i * w + j]);
    }
  }
  for (std::int64_t i = 0; i + 1 < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      total += std::abs(static_cast<double>(plane[(i + 1) * w + j]) - plane[i * w + j]);
    }
  }
  const double pairs = static_cast<double>(h * (w - 1) + (h - 1) * w);
  return total / pairs;
}

template <typename T>
double total_variation(const Tensor<T>& raw) {
  const Planes p = planes_of(raw.shape(), "total_variation");
  if (p.h < 2 || p.w < 2) throw DimensionError("total_variation needs h, w >= 2");
  const std::int64_t n = p.h * p.w;
  double total = 0.0;
  std::vector<double> z(static_cast<std::size_t>(n));
  for (std::int64_t c = 0; c < p.c; ++c) {
    const T* src = raw.data().data() + c * n;
    double mu = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mu += src[i];
    mu /= static_cast<double>(n);
    double mabs = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      z[static_cast<std::size_t>(i)] = src[i] - mu;
      mabs += std::abs(z[static_cast<std::size_t>(i)]);
    }
    mabs /= static_cast<double>(n);
    const double denom = std::max(mabs, kTvEpsilon);
    for (auto& v : z) v /= denom;
    total += anisotropic_tv<double>(z, p.h, p.w);
  }
  return total / static_cast<double>(p.c);
}

template <typename T>
double phase_spread(const Tensor<T>& map) {
  const Planes p = planes_of(map.shape(), "phase_spread");
  if (p.h % 2 != 0 || p.w % 2 != 0) throw DimensionError("phase_spread needs even h and w");
  double sums[4] = {0, 0, 0, 0};
  double abs_total = 0.0;
  for (std::int64_t c = 0; c < p.c; ++c) {
    for (std::int64_t i = 0; i < p.h; ++i) {
      for (std::int64_t j = 0; j < p.w; ++j) {
        const double v = map[(c * p.h + i) * p.w + j];
        sums[(i % 2) * 2 + (j % 2)] += v;
        abs_total += std::abs(v);
      }
    }
  }
  const double per_phase = static_cast<double>(p.c * p.h * p.w / 4);
  double lo = sums[0] / per_phase;
  double hi = lo;
  for (double s : sums) {
    lo = std::min(lo, s / per_phase);
    hi = std::max(hi, s / per_phase);
  }
  const double mean_abs = abs_total / static_cast<double>(p.c * p.h * p.w);
  return (hi - lo) / (mean_abs + 1e-12);
}

// ---------------------------------------------------------------------------
// Insertion / deletion
// ---------------------------------------------------------------------------

nlohmann::json to_json(const InsDelConfig& cfg) {
  return {{"steps", cfg.steps},
          {"blur_kernel", cfg.blur_kernel},
          {"blur_sigma", cfg.blur_sigma},
          {"baseline_value", cfg.baseline_value}};
}

template <typename T>
std::vector<std::int64_t> rank_pixels(const Tensor<T>& rendered) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(rendered.numel()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return rendered[a] > rendered[b]; });
  return order;
}

std::vector<std::int64_t> step_boundaries(std::int64_t pixels, int steps) {
  if (steps < 1 || pixels < 1) throw ConfigError("insertion/deletion needs steps >= 1 and pixels >= 1");
  const std::int64_t size = std::max<std::int64_t>(1, pixels / steps);
  std::vector<std::int64_t> out{0};
  for (int k = 1; k <= steps; ++k) {
    out.push_back(k == steps ? pixels : std::min(pixels, k * size));
  }
  return out;
}

double trapezoid_auc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("trapezoid_auc: x and y differ in length");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

template <typename T>
Tensor<T> view_probabilities(const ModelView<T>& view, const Tensor<T>& images, int batch_size) {
  std::vector<Tensor<T>> parts;
  for (std::int64_t first = 0; first < images.dim(0); first += batch_size) {
    const std::int64_t n = std::min<std::int64_t>(batch_size, images.dim(0) - first);
    parts.push_back(probabilities(view.graph().head(), view.logits(slice_batch(images, first, n))));
  }
  return concat_batch(std::span<const Tensor<T>>(parts));
}

template <typename T>
std::vector<double> target_probabilities(const ModelView<T>& view, const Tensor<T>& batch,
                                         std::int64_t target, int batch_size) {
  const Tensor<T> p = view_probabilities(view, batch, batch_size);
  const std::int64_t k = p.dim(1);
  std::vector<double> out(static_cast<std::size_t>(p.dim(0)));
  for (std::int64_t i = 0; i < p.dim(0); ++i) {
    // A single-logit head scores the positive class; target 0 reads it directly.
    out[static_cast<std::size_t>(i)] = static_cast<double>(p[i * k + (k == 1 ? 0 : target)]);
  }
  return out;
}

namespace {

enum class Direction { deletion, insertion };

template <typename T>
Curve perturbation_curve(const ModelView<T>& view, const Tensor<T>& image, const Tensor<T>& rendered,
                         std::int64_t target, const InsDelConfig& cfg, Direction dir) {
  const Tensor<T> x = image.rank() == 3 ? image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}) : image;
  if (x.rank() != 4 || x.dim(0) != 1) throw DimensionError("insertion/deletion expects one image");
  const std::int64_t c = x.dim(1);
  const std::int64_t h = x.dim(2);
  const std::int64_t w = x.dim(3);
  if (rendered.numel() != h * w) {
    throw DimensionError("saliency " + shape_string(rendered.shape()) + " is not at input resolution");
  }
  const std::int64_t pixels = h * w;
  const auto order = rank_pixels(rendered);
  const auto bounds = step_boundaries(pixels, cfg.steps);

  Tensor<T> current = dir == Direction::deletion ? x : gaussian_blur2d(x, cfg.blur_kernel, cfg.blur_sigma);
  const Tensor<T>& source = x;
  const T fill = static_cast<T>(cfg.baseline_value);
  std::vector<Tensor<T>> frames{current};
  for (std::size_t k = 1; k < bounds.size(); ++k) {
    for (std::int64_t r = bounds[k - 1]; r < bounds[k]; ++r) {
      const std::int64_t px = order[static_cast<std::size_t>(r)];
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const std::int64_t at = ch * pixels + px;
        current[at] = dir == Direction::deletion ? fill : source[at];
      }
    }
    frames.push_back(current);
  }
  Curve curve;
  curve.probability = target_probabilities(view, concat_batch(std::span<const Tensor<T>>(frames)), target,
                                           cfg.batch_size);
  for (auto b : bounds) curve.fraction.push_back(static_cast<double>(b) / static_cast<double>(pixels));
  curve.auc = trapezoid_auc(curve.fraction, curve.probability);
  return curve;
}

}  // namespace

template <typename T>
Curve deletion_score(const ModelView<T>& view, const Tensor<T>& image, const Tensor<T>& rendered,
                     std::int64_t target, const InsDelConfig& cfg) {
  return perturbation_curve(view, image, rendered, target, cfg, Direction::deletion);
}

template <typename T>
Curve insertion_score(const ModelView<T>& view, const Tensor<T>& image, const Tensor<T>& rendered,
                      std::int64_t target, const InsDelConfig& cfg) {
  return perturbation_curve(view, image, rendered, target, cfg, Direction::insertion);
}

template <typename T>
Tensor<T> noise_saliency(const ModelGraph<T>& model, const std::string& layer, std::uint64_t seed) {
  const Shape s = model.layer_shape(layer);
  if (s.size() != 3) throw UsageError("noise saliency needs a spatial layer, got '" + layer + "'");
  Tensor<T> map({s[1], s[2]});
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& v : map.data()) v = static_cast<T>(noise(rng));
  return bilinear_upsample(map, model.input.height, model.input.width);
}

// ---------------------------------------------------------------------------
// Prediction agreement
// ---------------------------------------------------------------------------

template <typename T>
PredDiffReport prediction_difference(const ModelView<T>& original, const ModelView<T>& variant,
                                     const Tensor<T>& images, std::span<const std::int64_t> targets,
                                     int batch_size) {
  if (original.graph().classes != variant.graph().classes) {
    throw UsageError("prediction_difference: views disagree on the class count");
  }
  if (static_cast<std::int64_t>(targets.size()) != images.dim(0)) {
    throw DimensionError("prediction_difference: one target per image required");
  }
  const Tensor<T> p = view_probabilities(original, images, batch_size);
  const Tensor<T> q = view_probabilities(variant, images, batch_size);
  const std::int64_t k = p.dim(1);
  PredDiffReport r;
  for (std::int64_t i = 0; i < p.dim(0); ++i) {
    double all = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      all += std::abs(static_cast<double>(q[i * k + j]) - static_cast<double>(p[i * k + j]));
    }
    const std::int64_t t = k == 1 ? 0 : targets[static_cast<std::size_t>(i)];
    r.all_classes.push_back(all * 100.0);
    r.target_class.push_back(std::abs(static_cast<double>(q[i * k + t]) - static_cast<double>(p[i * k + t])) * 100.0);
  }
  r.all_summary = summarize(r.all_classes);
  r.target_summary = summarize(r.target_class);
  return r;
}

template <typename T>
std::vector<std::int64_t> view_predictions(const ModelView<T>& view, const Tensor<T>& images, int batch_size) {
  std::vector<std::int64_t> out;
  for (std::int64_t first = 0; first < images.dim(0); first += batch_size) {
    const std::int64_t n = std::min<std::int64_t>(batch_size, images.dim(0) - first);
    const auto pred = predict_classes(view.logits(slice_batch(images, first, n)));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

template <typename T>
double accuracy(const ModelView<T>& view, const LabeledImages<T>& data, int batch_size) {
  if (data.size() == 0) return 0.0;
  const auto pred = view_predictions(view, data.images, batch_size);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Model randomization
// ---------------------------------------------------------------------------

template <typename T>
std::vector<std::string> default_cut_points(const ModelGraph<T>& model) {
  std::vector<std::string> out{"none"};
  const auto params = parameterized_layers(model);
  if (!params.empty()) out.push_back(params.back());
  int stages = 0;
  while (model.aliases.count("stage" + std::to_string(stages + 1) + ".out")) ++stages;
  for (int s = stages; s >= 1; --s) out.push_back("stage" + std::to_string(s));
  if (!params.empty() && params.front() != params.back()) out.push_back(params.front());
  return out;
}

template <typename T>
std::string resolve_cut_point(const ModelGraph<T>& model, const std::string& cut) {
  if (cut == "none") return "";
  if (model.has_layer(cut)) {
    const auto& l = model.layer(cut);
    if (!l.has_params()) throw UsageError("cut point '" + cut + "' has no parameters");
    return l.id;
  }
  const std::string prefix = cut + ".";
  for (const auto& l : model.layers) {
    if (l.has_params() && l.id.rfind(prefix, 0) == 0) return l.id;
  }
  throw UsageError("unknown cut point '" + cut + "'");
}

template <typename T>
RandomizationReport randomization_suite(const ModelGraph<T>& model, const Tensor<T>& images,
                                        std::span<const std::int64_t> targets,
                                        const RandomizationConfig& cfg) {
  if (cfg.mode == HookMode::surrogate) {
    throw ConfigError("randomization runs in original, backward or forward mode");
  }
  if (static_cast<std::int64_t>(targets.size()) != images.dim(0)) {
    throw DimensionError("randomization_suite: one target per image required");
  }
  const ModelView<T> scorer = attach(model, cfg.mode, cfg.rolls);
  const std::uint64_t rand_seed = stream_seed(cfg.seed, "randomize");
  const std::int64_t n = images.dim(0);

  auto score = [&](RandomizationRow& row, std::int64_t i, const Tensor<T>& rendered) {
    const Tensor<T> x = slice_batch(images, i, 1);
    const std::int64_t t = targets[static_cast<std::size_t>(i)];
    row.deletion.push_back(deletion_score(scorer, x, rendered, t, cfg.insdel).auc);
    row.insertion.push_back(insertion_score(scorer, x, rendered, t, cfg.insdel).auc);
  };

  RandomizationReport report;
  for (const auto& cut : cfg.cut_points) {
    RandomizationRow row;
    row.cut = cut;
    row.layer = resolve_cut_point(model, cut);
    const ModelGraph<T> randomized = row.layer.empty() ? model : randomize_from_end(model, row.layer, rand_seed);
    const ModelView<T> view = attach(randomized, cfg.mode, cfg.rolls);
    for (std::int64_t i = 0; i < n; ++i) {
      AttributionRequest req = cfg.request;
      req.target = targets[static_cast<std::size_t>(i)];
      if (req.smoothgrad) req.smoothgrad->seed = smoothgrad_seed(cfg.seed, i);
      score(row, i, attribute(view, slice_batch(images, i, 1), req).rendered);
    }
    row.deletion_summary = summarize(row.deletion);
    row.insertion_summary = summarize(row.insertion);
    report.rows.push_back(std::move(row));
  }

  RandomizationRow noise;
  noise.cut = "noise";
  const std::string layer = attribution_layer(model, cfg.request);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint64_t seed = stream_seed(cfg.seed, "noise-baseline/" + std::to_string(i));
    score(noise, i, noise_saliency(model, layer, seed));
  }
  noise.deletion_summary = summarize(noise.deletion);
  noise.insertion_summary = summarize(noise.insertion);
  report.rows.push_back(std::move(noise));
  return report;
}

#define SMOOTHSAL_METRICS_INSTANTIATE(T)                                                            \
  template Tensor<T> zero_mean_channels<T>(const Tensor<T>&);                                      \
  template double anisotropic_tv<T>(std::span<const T>, std::int64_t, std::int64_t);               \
  template double total_variation<T>(const Tensor<T>&);                                            \
  template double phase_spread<T>(const Tensor<T>&);                                               \
  template std::vector<std::int64_t> rank_pixels<T>(const Tensor<T>&);                             \
  template std::vector<double> target_probabilities<T>(const ModelView<T>&, const Tensor<T>&,      \
                                                       std::int64_t, int);                         \
  template Curve deletion_score<T>(const ModelView<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                   std::int64_t, const InsDelConfig&);                             \
  template Curve insertion_score<T>(const ModelView<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                    std::int64_t, const InsDelConfig&);                            \
  template Tensor<T> noise_saliency<T>(const ModelGraph<T>&, const std::string&, std::uint64_t);   \
  template PredDiffReport prediction_difference<T>(const ModelView<T>&, const ModelView<T>&,       \
                                                   const Tensor<T>&, std::span<const std::int64_t>, \
                                                   int);                                           \
  template Tensor<T> view_probabilities<T>(const ModelView<T>&, const Tensor<T>&, int);            \
  template std::vector<std::int64_t> view_predictions<T>(const ModelView<T>&, const Tensor<T>&, int); \
  template double accuracy<T>(const ModelView<T>&, const LabeledImages<T>&, int);                  \
  template std::vector<std::string> default_cut_points<T>(const ModelGraph<T>&);                   \
  template std::string resolve_cut_point<T>(const ModelGraph<T>&, const std::string&);             \
  template RandomizationReport randomization_suite<T>(const ModelGraph<T>&, const Tensor<T>&,      \
                                                      std::span<const std::int64_t>,               \
                                                      const RandomizationConfig&);

SMOOTHSAL_METRICS_INSTANTIATE(float)
SMOOTHSAL_METRICS_INSTANTIATE(double)

}  // namespace smoothsal
