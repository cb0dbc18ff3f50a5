// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/checkpoint.hpp"

#include "smoothsal/errors.hpp"
#include "smoothsal/tensor_io.hpp"

namespace smoothsal {

namespace {

std::string dtype_name(DType d) { return d == DType::float32 ? "float32" : "float64"; }

nlohmann::json parse_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw FormatError("missing manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (j.value("format_version", 0) != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported format version");
  }
  return j;
}

}  // namespace

template <typename T>
void save_bundle(const TensorBundle<T>& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "tensors");
  nlohmann::json manifest = bundle.manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["dtype"] = dtype_name(dtype_of<T>());
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, t] : bundle.tensors) {
    const std::string file = "tensors/" + key + ".stns";
    write_stns(dir / file, t);
    entries.push_back({{"key", key}, {"file", file}, {"shape", t.shape()}});
  }
  manifest["tensors"] = entries;
  write_file_bytes(dir / "manifest.json", manifest.dump(2) + "\n");
}

template <typename T>
TensorBundle<T> load_bundle(const std::filesystem::path& dir) {
  TensorBundle<T> out;
  out.manifest = parse_manifest(dir);
  for (const nlohmann::json& e : out.manifest.at("tensors")) {
    const std::string key = e.at("key").get<std::string>();
    const auto path = dir / e.at("file").get<std::string>();
    if (!std::filesystem::exists(path)) throw FormatError("missing tensor blob " + path.string());
    Tensor<T> t = read_stns<T>(path);
    if (t.shape() != e.at("shape").get<Shape>()) {
      throw FormatError(path.string() + ": shape " + shape_string(t.shape()) +
                        " disagrees with the manifest");
    }
    if (!out.tensors.emplace(key, std::move(t)).second) {
      throw FormatError("tensor '" + key + "' listed twice in " + dir.string());
    }
  }
  // dtype records how blobs are stored; the loaded bundle is in T.
  out.manifest.erase("tensors");
  out.manifest.erase("format_version");
  out.manifest.erase("dtype");
  return out;
}

template <typename T>
void save_checkpoint(const ModelGraph<T>& model, const std::filesystem::path& dir) {
  TensorBundle<T> b;
  b.manifest["kind"] = "model";
  b.manifest["input"] = {{"channels", model.input.channels},
                         {"height", model.input.height},
                         {"width", model.input.width}};
  b.manifest["classes"] = model.classes;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers) layers.push_back(to_json(l));
  b.manifest["layers"] = layers;
  b.manifest["aliases"] = model.aliases;
  b.manifest["architecture"] = model.architecture;
  b.manifest["metadata"] = model.metadata;
  b.tensors = model.params;
  save_bundle(b, dir);
}

template <typename T>
ModelGraph<T> load_checkpoint(const std::filesystem::path& dir) {
  TensorBundle<T> b = load_bundle<T>(dir);
  const nlohmann::json& m = b.manifest;
  if (m.value("kind", "") != "model") throw FormatError(dir.string() + " is not a model checkpoint");
  ModelGraph<T> model;
  try {
    model.input.channels = m.at("input").at("channels").get<int>();
    model.input.height = m.at("input").at("height").get<int>();
    model.input.width = m.at("input").at("width").get<int>();
    model.classes = m.at("classes").get<int>();
    for (const auto& l : m.at("layers")) model.layers.push_back(layer_from_json(l));
    model.aliases = m.at("aliases").get<std::map<std::string, std::string>>();
    model.architecture = m.at("architecture");
    model.metadata = m.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed model manifest: " + e.what());
  }
  model.params = std::move(b.tensors);
  for (const auto& l : model.layers) {
    for (const auto& p : l.param_names()) {
      if (!model.params.count(param_key(l.id, p))) {
        throw FormatError("checkpoint is missing blob for " + param_key(l.id, p));
      }
    }
  }
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return model;
}

#define SMOOTHSAL_CHECKPOINT_INSTANTIATE(T)                                            \
  template void save_bundle<T>(const TensorBundle<T>&, const std::filesystem::path&); \
  template TensorBundle<T> load_bundle<T>(const std::filesystem::path&);              \
  template void save_checkpoint<T>(const ModelGraph<T>&, const std::filesystem::path&); \
  template ModelGraph<T> load_checkpoint<T>(const std::filesystem::path&);

SMOOTHSAL_CHECKPOINT_INSTANTIATE(float)
SMOOTHSAL_CHECKPOINT_INSTANTIATE(double)

}  // namespace smoothsal
