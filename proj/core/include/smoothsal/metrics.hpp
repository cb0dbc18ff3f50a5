// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothsal/saliency.hpp"

namespace smoothsal {

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
  std::size_t count = 0;
};

// Accumulates in index order, so the result does not depend on how the
// values were produced.
Summary summarize(std::span<const double> values);
nlohmann::json to_json(const Summary& s);

// ---------------------------------------------------------------------------
// Noise measures
// ---------------------------------------------------------------------------

inline constexpr double kTvEpsilon = 1e-6;

// Per-channel mean removal of a C x h x w map.
template <typename T>
Tensor<T> zero_mean_channels(const Tensor<T>& raw);

// Mean absolute difference over all horizontal and vertical neighbour pairs
// of one h x w plane.
template <typename T>
double anisotropic_tv(std::span<const T> plane, std::int64_t h, std::int64_t w);

// Channel average of anisotropic_tv(z' / max(mean|z'|, 1e-6)) with z' the
// zero-meaned channel. Accepts C x h x w or h x w; h, w >= 2.
template <typename T>
double total_variation(const Tensor<T>& raw);

// (max - min) of the four interleaved-grid means, over mean|map| + 1e-12.
// Accepts h x w or C x h x w (grids pooled over channels); h, w even.
template <typename T>
double phase_spread(const Tensor<T>& map);

// ---------------------------------------------------------------------------
// Insertion / deletion
// ---------------------------------------------------------------------------

struct InsDelConfig {
  int steps = 100;
  int blur_kernel = 11;
  double blur_sigma = 5.0;
  double baseline_value = 0.0;  // deletion fill, in normalized space
  int batch_size = 32;
};

nlohmann::json to_json(const InsDelConfig& cfg);

struct Curve {
  std::vector<double> fraction;     // 0 .. 1, steps + 1 points
  std::vector<double> probability;  // target-class probability at each point
  double auc = 0.0;                 // trapezoid over fraction
};

// Pixel order by descending saliency; equal values keep row-major order.
template <typename T>
std::vector<std::int64_t> rank_pixels(const Tensor<T>& rendered);

// Pixel counts changed after each step: size P / steps, last step takes the rest.
std::vector<std::int64_t> step_boundaries(std::int64_t pixels, int steps);

double trapezoid_auc(std::span<const double> x, std::span<const double> y);

// Softmax (sigmoid for single-logit heads) probability of `target` for each row.
template <typename T>
std::vector<double> target_probabilities(const ModelView<T>& view, const Tensor<T>& batch,
                                         std::int64_t target, int batch_size);

template <typename T>
Curve deletion_score(const ModelView<T>& view, const Tensor<T>& image, const Tensor<T>& rendered,
                     std::int64_t target, const InsDelConfig& cfg = {});

template <typename T>
Curve insertion_score(const ModelView<T>& view, const Tensor<T>& image, const Tensor<T>& rendered,
                      std::int64_t target, const InsDelConfig& cfg = {});

// Gaussian noise at the layer's spatial size, upscaled to the input size.
template <typename T>
Tensor<T> noise_saliency(const ModelGraph<T>& model, const std::string& layer, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Prediction agreement
// ---------------------------------------------------------------------------

struct PredDiffReport {
  std::vector<double> all_classes;   // per sample, x100
  std::vector<double> target_class;  // per sample, x100
  Summary all_summary;
  Summary target_summary;
};

template <typename T>
PredDiffReport prediction_difference(const ModelView<T>& original, const ModelView<T>& variant,
                                     const Tensor<T>& images, std::span<const std::int64_t> targets,
                                     int batch_size = 32);

// Per-row probabilities (softmax, or sigmoid for single-logit heads).
template <typename T>
Tensor<T> view_probabilities(const ModelView<T>& view, const Tensor<T>& images, int batch_size = 32);

template <typename T>
std::vector<std::int64_t> view_predictions(const ModelView<T>& view, const Tensor<T>& images,
                                           int batch_size = 32);

template <typename T>
double accuracy(const ModelView<T>& view, const LabeledImages<T>& data, int batch_size = 32);

// ---------------------------------------------------------------------------
// Model randomization
// ---------------------------------------------------------------------------

struct RandomizationConfig {
  // "none", a parameterized layer id, or a prefix such as "stage3" meaning
  // that stage's first parameterized layer. Ordered from the head to the stem.
  std::vector<std::string> cut_points;
  AttributionRequest request;
  InsDelConfig insdel;
  HookMode mode = HookMode::original;
  RollSet rolls;
  std::uint64_t seed = 0;
};

// "none", "fc", then every stage from last to first, then "stem".
template <typename T>
std::vector<std::string> default_cut_points(const ModelGraph<T>& model);

template <typename T>
std::string resolve_cut_point(const ModelGraph<T>& model, const std::string& cut);

struct RandomizationRow {
  std::string cut;    // as requested, or "noise" for the noise-saliency row
  std::string layer;  // resolved first re-initialized layer; empty for none/noise
  std::vector<double> deletion;
  std::vector<double> insertion;
  Summary deletion_summary;
  Summary insertion_summary;
};

struct RandomizationReport {
  std::vector<RandomizationRow> rows;  // cut points in order, then the noise row
};

/// For each cut point, re-initializes the model from that layer to the head,
/// recomputes saliency on the randomized model, and scores it with
/// insertion/deletion on the trained model. The extra "noise" row scores
/// Gaussian-noise saliency drawn from stream "noise-baseline/<sample>".
template <typename T>
RandomizationReport randomization_suite(const ModelGraph<T>& model, const Tensor<T>& images,
                                        std::span<const std::int64_t> targets,
                                        const RandomizationConfig& cfg);

}  // namespace smoothsal
