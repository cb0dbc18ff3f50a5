// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smoothsal/errors.hpp"
#include "smoothsal/tensor_io.hpp"

namespace smoothsal {

namespace {

struct Extent {
  int h;
  int w;
};

template <typename T>
Extent map_extent(const Tensor<T>& map) {
  if (map.rank() == 2) return {static_cast<int>(map.dim(0)), static_cast<int>(map.dim(1))};
  if (map.rank() == 3 && map.dim(0) == 1) return {static_cast<int>(map.dim(1)), static_cast<int>(map.dim(2))};
  throw DimensionError("image output expects an h x w map, got " + shape_string(map.shape()));
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace

template <typename T>
Image8 to_gray(const Tensor<T>& map) {
  const Extent e = map_extent(map);
  Image8 img{e.w, e.h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(e.w) * e.h)};
  const auto d = map.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = range > 0 ? to_byte((static_cast<double>(d[i]) - *lo) / range) : 128;
  }
  return img;
}

template <typename T>
Image8 signed_colormap(const Tensor<T>& map) {
  const Extent e = map_extent(map);
  Image8 img{e.w, e.h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(e.w) * e.h * 3)};
  const double scale = static_cast<double>(max_abs(map));
  for (std::int64_t i = 0; i < map.numel(); ++i) {
    const double v = scale > 0 ? std::clamp(static_cast<double>(map[i]) / scale, -1.0, 1.0) : 0.0;
    // White at zero, fading the opposite channels towards the saturated end.
    const double r = v < 0 ? 1.0 + v : 1.0;
    const double g = 1.0 - std::abs(v);
    const double b = v > 0 ? 1.0 - v : 1.0;
    img.pixels[static_cast<std::size_t>(i) * 3 + 0] = to_byte(r);
    img.pixels[static_cast<std::size_t>(i) * 3 + 1] = to_byte(g);
    img.pixels[static_cast<std::size_t>(i) * 3 + 2] = to_byte(b);
  }
  return img;
}

template <typename T>
Image8 overlay(const Tensor<T>& image, const Tensor<T>& map, double alpha) {
  if (image.rank() != 3) throw DimensionError("overlay expects a C x H x W image");
  const Image8 colors = signed_colormap(map);
  const std::int64_t c = image.dim(0);
  const std::int64_t plane = image.dim(1) * image.dim(2);
  if (colors.width != image.dim(2) || colors.height != image.dim(1)) {
    throw DimensionError("overlay: map and image sizes differ");
  }
  Image8 out{colors.width, colors.height, 3, std::vector<std::uint8_t>(colors.pixels.size())};
  for (std::int64_t p = 0; p < plane; ++p) {
    for (int k = 0; k < 3; ++k) {
      const double base = std::clamp(static_cast<double>(image[(c == 1 ? 0 : k) * plane + p]), 0.0, 1.0);
      const double m = colors.pixels[static_cast<std::size_t>(p) * 3 + k] / 255.0;
      out.pixels[static_cast<std::size_t>(p) * 3 + k] = to_byte((1.0 - alpha) * base + alpha * m);
    }
  }
  return out;
}

std::string encode_pgm(const Image8& img) {
  if (img.channels != 1) throw DimensionError("PGM holds gray images only");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

Image8 decode_pgm(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w < 1 || h < 1 || maxval != 255) throw FormatError("not an 8-bit binary PGM");
  in.get();
  Image8 img{w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw FormatError("truncated PGM");
  return img;
}

std::string encode_png(const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw DimensionError("PNG output supports 1 or 3 channels");
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  std::string raw;
  raw.reserve((row + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back('\0');  // filter type: none
    raw.append(reinterpret_cast<const char*>(img.pixels.data()) + y * row, row);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw FormatError("PNG compression failed");
  }
  packed.resize(packed_size);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(static_cast<char>(img.channels == 3 ? 2 : 0));  // colour type
  ihdr.append(3, '\0');                                // compression, filter, interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", "");
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image8& img) { write_file_bytes(path, encode_pgm(img)); }
void write_png(const std::filesystem::path& path, const Image8& img) { write_file_bytes(path, encode_png(img)); }

template Image8 to_gray<float>(const Tensor<float>&);
template Image8 to_gray<double>(const Tensor<double>&);
template Image8 signed_colormap<float>(const Tensor<float>&);
template Image8 signed_colormap<double>(const Tensor<double>&);
template Image8 overlay<float>(const Tensor<float>&, const Tensor<float>&, double);
template Image8 overlay<double>(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace smoothsal
