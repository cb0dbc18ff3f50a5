// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "smoothsal/errors.hpp"
#include "smoothsal/random.hpp"
#include "smoothsal/tensor_io.hpp"

namespace smoothsal {

template <typename T>
LabeledImages<T> LabeledImages<T>::subset(std::span<const std::int64_t> indices) const {
  LabeledImages out;
  out.images = gather_batch(images, indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels.at(static_cast<std::size_t>(i)));
  return out;
}

template <typename T>
LabeledImages<T> LabeledImages<T>::head(std::int64_t n) const {
  n = std::min(n, size());
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return subset(idx);
}

template struct LabeledImages<float>;
template struct LabeledImages<double>;

nlohmann::json to_json(const ShapesConfig& cfg) {
  return {{"generator", "shapes"},
          {"classes", cfg.classes},
          {"channels", cfg.channels},
          {"image_size", cfg.image_size},
          {"train_count", cfg.train_count},
          {"val_count", cfg.val_count},
          {"seed", cfg.seed}};
}

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Portable Fisher-Yates; std::shuffle's draw sequence is library-specific.
void shuffle_labels(std::vector<std::int64_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

bool inside_shape(int label, double u, double v, double r) {
  switch (label) {
    case 0:
      return u * u + v * v <= r * r;
    case 1: {
      const double h = 0.8 * r;
      return std::abs(u) <= h && std::abs(v) <= h;
    }
    case 2: {
      // Equilateral triangle with circumradius r, apex at -v.
      const double s3 = std::sqrt(3.0);
      return v <= 0.5 * r && s3 * u - v <= r && -s3 * u - v <= r;
    }
    default: {
      const double arm = 0.3 * r;
      return (std::abs(u) <= r && std::abs(v) <= arm) || (std::abs(v) <= r && std::abs(u) <= arm);
    }
  }
}

// Renders one raw image in [0, 1]-ish units into `out` (C x S x S).
void render(int label, int channels, int size, Rng& rng, float* out) {
  double bg[3];
  double fg[3];
  for (int k = 0; k < 3; ++k) {
    bg[k] = uniform(rng, 0.15, 0.85);
    fg[k] = std::clamp(1.0 - bg[k] + uniform(rng, -0.25, 0.25), 0.0, 1.0);
  }
  const double grad_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double grad_amp = uniform(rng, 0.0, 0.3);
  const double tex_freq = uniform(rng, 0.2, 0.8);
  const double tex_angle = uniform(rng, 0.0, std::numbers::pi);
  const double tex_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double tex_amp = uniform(rng, 0.0, 0.12);

  const double r = uniform(rng, 0.14, 0.28) * size;
  const double cy = uniform(rng, r, size - r);
  const double cx = uniform(rng, r, size - r);
  const double rot = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double cr = std::cos(rot);
  const double sr = std::sin(rot);

  std::normal_distribution<double> noise(0.0, 0.03);
  const std::size_t plane = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = ((x - size / 2.0) * std::cos(grad_angle) + (y - size / 2.0) * std::sin(grad_angle)) / size;
      const double tex = tex_amp * std::sin(tex_freq * (x * std::cos(tex_angle) + y * std::sin(tex_angle)) + tex_phase);
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const bool in = inside_shape(label, cr * dx + sr * dy, -sr * dx + cr * dy, r);
      double rgb[3];
      for (int k = 0; k < 3; ++k) {
        rgb[k] = (in ? fg[k] : bg[k] + grad_amp * t + tex) + noise(rng);
      }
      const std::size_t at = static_cast<std::size_t>(y) * size + x;
      if (channels == 1) {
        out[at] = static_cast<float>((rgb[0] + rgb[1] + rgb[2]) / 3.0);
      } else {
        for (int k = 0; k < 3; ++k) out[k * plane + at] = static_cast<float>(rgb[k]);
      }
    }
  }
}

LabeledImages<float> render_split(const ShapesConfig& cfg, std::int64_t count,
                                  const std::string& split) {
  LabeledImages<float> out;
  out.labels.resize(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) out.labels[static_cast<std::size_t>(i)] = i % cfg.classes;
  Rng order = make_rng(cfg.seed, "data/" + split + "/labels");
  shuffle_labels(out.labels, order);

  out.images = Tensor<float>({count, cfg.channels, cfg.image_size, cfg.image_size});
  const std::int64_t stride = static_cast<std::int64_t>(cfg.channels) * cfg.image_size * cfg.image_size;
  for (std::int64_t i = 0; i < count; ++i) {
    Rng rng = make_rng(cfg.seed, "data/" + split + "/" + std::to_string(i));
    render(static_cast<int>(out.labels[static_cast<std::size_t>(i)]), cfg.channels,
           cfg.image_size, rng, out.images.data().data() + i * stride);
  }
  return out;
}

void normalize(Tensor<float>& images, const std::vector<double>& mean, const std::vector<double>& std) {
  const std::int64_t n = images.dim(0);
  const std::int64_t c = images.dim(1);
  const std::int64_t plane = images.dim(2) * images.dim(3);
  auto d = images.data();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < c; ++k) {
      float* p = d.data() + (i * c + k) * plane;
      for (std::int64_t j = 0; j < plane; ++j) {
        p[j] = static_cast<float>((p[j] - mean[k]) / std[k]);
      }
    }
  }
}

Tensor<float> labels_tensor(const std::vector<std::int64_t>& labels) {
  Tensor<float> t({static_cast<std::int64_t>(labels.size())});
  for (std::size_t i = 0; i < labels.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<float>(labels[i]);
  return t;
}

std::vector<std::int64_t> labels_from(const Tensor<float>& t, int classes, const std::string& what) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(t.numel()));
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const float v = t[i];
    if (v != std::floor(v) || v < 0 || v >= static_cast<float>(std::max(classes, 2))) {
      throw FormatError(what + ": label " + std::to_string(v) + " is not a class index");
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
  }
  return out;
}

}  // namespace

Dataset generate_shapes(const ShapesConfig& cfg) {
  if (cfg.classes < 2 || cfg.classes > 4) throw ConfigError("shapes dataset supports 2 to 4 classes");
  if (cfg.channels != 1 && cfg.channels != 3) throw ConfigError("shapes dataset needs 1 or 3 channels");
  if (cfg.image_size < 8) throw ConfigError("shapes image size must be at least 8");
  if (cfg.train_count < 1 || cfg.val_count < 0) throw ConfigError("shapes split sizes must be positive");

  Dataset d;
  d.train = render_split(cfg, cfg.train_count, "train");
  if (cfg.val_count > 0) d.val = render_split(cfg, cfg.val_count, "val");

  const std::int64_t n = d.train.images.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(cfg.image_size) * cfg.image_size;
  std::vector<double> mean(static_cast<std::size_t>(cfg.channels), 0.0);
  std::vector<double> sd(static_cast<std::size_t>(cfg.channels), 0.0);
  const auto raw = d.train.images.data();
  for (int k = 0; k < cfg.channels; ++k) {
    double s = 0.0;
    double s2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const float* p = raw.data() + (i * cfg.channels + k) * plane;
      for (std::int64_t j = 0; j < plane; ++j) {
        s += p[j];
        s2 += static_cast<double>(p[j]) * p[j];
      }
    }
    const double count = static_cast<double>(n * plane);
    mean[k] = s / count;
    sd[k] = std::sqrt(std::max(s2 / count - mean[k] * mean[k], 1e-12));
  }
  normalize(d.train.images, mean, sd);
  if (cfg.val_count > 0) normalize(d.val.images, mean, sd);

  d.manifest = to_json(cfg);
  d.manifest["class_names"] = std::vector<std::string>(shape_class_names().begin(),
                                                       shape_class_names().begin() + cfg.classes);
  d.manifest["mean"] = mean;
  d.manifest["std"] = sd;
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_bytes(dir / "manifest.json", data.manifest.dump(2) + "\n");
  write_stns(dir / "train_images.stns", data.train.images);
  write_stns(dir / "train_labels.stns", labels_tensor(data.train.labels));
  if (data.val.size() > 0) {
    write_stns(dir / "val_images.stns", data.val.images);
    write_stns(dir / "val_labels.stns", labels_tensor(data.val.labels));
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json")) {
    throw FormatError("no dataset manifest in " + dir.string());
  }
  Dataset d;
  try {
    d.manifest = nlohmann::json::parse(read_file_bytes(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  const int classes = d.manifest.value("classes", 0);
  auto load_split = [&](const std::string& split) {
    LabeledImages<float> s;
    s.images = read_stns<float>(dir / (split + "_images.stns"));
    s.labels = labels_from(read_stns<float>(dir / (split + "_labels.stns")), classes, split);
    if (s.images.rank() != 4 || s.images.dim(0) != s.size()) {
      throw FormatError(split + " images " + shape_string(s.images.shape()) + " do not match " +
                        std::to_string(s.size()) + " labels");
    }
    return s;
  };
  d.train = load_split("train");
  if (std::filesystem::exists(dir / "val_images.stns")) d.val = load_split("val");
  return d;
}

Tensor<float> denormalize(const Tensor<float>& image, const std::vector<double>& mean,
                          const std::vector<double>& std) {
  if (image.rank() != 3 || static_cast<std::size_t>(image.dim(0)) != mean.size() ||
      mean.size() != std.size()) {
    throw DimensionError("denormalize: image " + shape_string(image.shape()) +
                         " does not match the channel statistics");
  }
  Tensor<float> out = image;
  const std::int64_t plane = image.dim(1) * image.dim(2);
  for (std::int64_t k = 0; k < image.dim(0); ++k) {
    for (std::int64_t j = 0; j < plane; ++j) {
      auto& v = out[k * plane + j];
      v = static_cast<float>(v * std[k] + mean[k]);
    }
  }
  return out;
}

}  // namespace smoothsal
