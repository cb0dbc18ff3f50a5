// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// Raw tensor files (.stns):
//   "STNS" | version 0x01 | dtype (0x01 f32, 0x02 f64) | u8 rank |
//   rank x u32 LE extents | row-major LE payload

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "smoothsal/tensor.hpp"

namespace smoothsal {

inline constexpr std::uint8_t kStnsVersion = 0x01;

struct StnsHeader {
  DType dtype;
  Shape shape;
};

template <typename T>
std::string encode_stns(const Tensor<T>& t);

StnsHeader decode_stns_header(std::string_view bytes);

// Accepts either stored dtype; the payload is converted to T.
template <typename T>
Tensor<T> decode_stns(std::string_view bytes);

template <typename T>
void write_stns(const std::filesystem::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> read_stns(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace smoothsal
