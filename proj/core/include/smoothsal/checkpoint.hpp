// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "smoothsal/model.hpp"
#include "smoothsal/tensor.hpp"

namespace smoothsal {

inline constexpr int kCheckpointVersion = 1;

// A manifest plus named tensors, stored as
//   <dir>/manifest.json
//   <dir>/tensors/<key>.stns
// The manifest gains a "tensors" array of {key, file, shape} entries, one per
// tensor. JSON keys are written sorted, so load followed by save reproduces
// the same bytes.
template <typename T>
struct TensorBundle {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, Tensor<T>> tensors;
};

template <typename T>
void save_bundle(const TensorBundle<T>& bundle, const std::filesystem::path& dir);

// Converts stored tensors to T. Throws FormatError on a missing or corrupt
// blob or a manifest of another version.
template <typename T>
TensorBundle<T> load_bundle(const std::filesystem::path& dir);

template <typename T>
void save_checkpoint(const ModelGraph<T>& model, const std::filesystem::path& dir);

template <typename T>
ModelGraph<T> load_checkpoint(const std::filesystem::path& dir);

}  // namespace smoothsal
