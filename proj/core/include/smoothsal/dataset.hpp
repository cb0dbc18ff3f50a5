// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothsal/tensor.hpp"

namespace smoothsal {

// Images N x C x H x W in normalized space, labels in [0, classes).
template <typename T>
struct LabeledImages {
  Tensor<T> images;
  std::vector<std::int64_t> labels;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  LabeledImages subset(std::span<const std::int64_t> indices) const;
  LabeledImages head(std::int64_t n) const;
  template <typename U>
  LabeledImages<U> cast() const {
    return {images.template cast<U>(), labels};
  }
};

struct ShapesConfig {
  int classes = 4;  // circle, square, triangle, cross; 2..4
  int channels = 3;
  int image_size = 64;
  std::int64_t train_count = 4000;
  std::int64_t val_count = 1000;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const ShapesConfig& cfg);

struct Dataset {
  nlohmann::json manifest;  // generator config plus per-channel mean and std
  LabeledImages<float> train;
  LabeledImages<float> val;

  int classes() const { return manifest.at("classes").get<int>(); }
  std::vector<double> channel_mean() const { return manifest.at("mean").get<std::vector<double>>(); }
  std::vector<double> channel_std() const { return manifest.at("std").get<std::vector<double>>(); }
};

inline const std::vector<std::string>& shape_class_names() {
  static const std::vector<std::string> names{"circle", "square", "triangle", "cross"};
  return names;
}

/// Procedural shapes classification set.
///
/// Each image is a textured background (smooth colour gradient plus a
/// sinusoidal pattern plus pixel noise) with one filled shape at a random
/// position, scale and colour. Labels are balanced: sample i of a split gets
/// label i mod classes before a seeded shuffle. Normalization statistics are
/// measured on the raw training split and applied to both splits.
Dataset generate_shapes(const ShapesConfig& cfg);

// Layout: manifest.json, {train,val}_{images,labels}.stns.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Inverse of the dataset normalization, for rendering overlays. Input C x H x W.
Tensor<float> denormalize(const Tensor<float>& image, const std::vector<double>& mean,
                          const std::vector<double>& std);

}  // namespace smoothsal
