// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoothsal/tensor.hpp"

namespace smoothsal {

// 8-bit image, row-major, `channels` interleaved samples per pixel.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

// Min-max normalization to 0..255; a constant map becomes uniform 128.
template <typename T>
Image8 to_gray(const Tensor<T>& map);

// Blue-white-red diverging map, symmetric around zero: -max|v| is blue,
// 0 white, +max|v| red.
template <typename T>
Image8 signed_colormap(const Tensor<T>& map);

// Blends signed_colormap(map) onto `image` (C x H x W, values in [0, 1]
// after de-normalization; clamped) with weight `alpha` on the map.
template <typename T>
Image8 overlay(const Tensor<T>& image, const Tensor<T>& map, double alpha);

// Binary PGM (P5) for gray images.
std::string encode_pgm(const Image8& img);
Image8 decode_pgm(std::string_view bytes);
// RGB (or gray) PNG, one unfiltered IDAT stream.
std::string encode_png(const Image8& img);

void write_pgm(const std::filesystem::path& path, const Image8& img);
void write_png(const std::filesystem::path& path, const Image8& img);

}  // namespace smoothsal
