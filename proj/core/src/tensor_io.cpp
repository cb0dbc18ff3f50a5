// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "smoothsal/errors.hpp"

namespace smoothsal {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::string& out, U value) {
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(buf[i], buf[sizeof(U) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t offset) {
  if (offset + sizeof(U) > bytes.size()) throw FormatError("stns: truncated data");
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, bytes.data() + offset, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(buf[i], buf[sizeof(U) - 1 - i]);
  }
  U value;
  std::memcpy(&value, buf, sizeof(U));
  return value;
}

constexpr std::size_t kFixedHeader = 7;  // magic(4) + version + dtype + rank

}  // namespace

template <typename T>
std::string encode_stns(const Tensor<T>& t) {
  if (t.rank() == 0 || t.rank() > 255) throw DimensionError("stns: rank must be in [1, 255]");
  std::string out = "STNS";
  out.push_back(static_cast<char>(kStnsVersion));
  out.push_back(static_cast<char>(dtype_of<T>()));
  out.push_back(static_cast<char>(t.rank()));
  for (auto e : t.shape()) {
    if (e > 0xFFFFFFFFll) throw DimensionError("stns: extent exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  }
  out.reserve(out.size() + sizeof(T) * static_cast<std::size_t>(t.numel()));
  for (T v : t.data()) put_le<T>(out, v);
  return out;
}

StnsHeader decode_stns_header(std::string_view bytes) {
  if (bytes.size() < kFixedHeader || bytes.substr(0, 4) != "STNS") {
    throw FormatError("stns: bad magic");
  }
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kStnsVersion) {
    throw FormatError("stns: unsupported version " + std::to_string(version));
  }
  const auto dtype = static_cast<std::uint8_t>(bytes[5]);
  if (dtype != 0x01 && dtype != 0x02) {
    throw FormatError("stns: unknown dtype byte " + std::to_string(dtype));
  }
  const auto rank = static_cast<std::uint8_t>(bytes[6]);
  if (rank == 0) throw FormatError("stns: rank 0");
  StnsHeader h{static_cast<DType>(dtype), {}};
  for (std::size_t i = 0; i < rank; ++i) {
    const auto e = get_le<std::uint32_t>(bytes, kFixedHeader + 4 * i);
    if (e == 0) throw FormatError("stns: zero extent");
    h.shape.push_back(e);
  }
  return h;
}

template <typename T>
Tensor<T> decode_stns(std::string_view bytes) {
  const StnsHeader h = decode_stns_header(bytes);
  const std::size_t offset = kFixedHeader + 4 * h.shape.size();
  const auto n = static_cast<std::size_t>(shape_numel(h.shape));
  const std::size_t width = h.dtype == DType::float32 ? 4 : 8;
  if (bytes.size() != offset + n * width) {
    throw FormatError("stns: payload size " + std::to_string(bytes.size() - offset) +
                      " does not match shape " + shape_string(h.shape));
  }
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (h.dtype == DType::float32) {
      data[i] = static_cast<T>(get_le<float>(bytes, offset + i * 4));
    } else {
      data[i] = static_cast<T>(get_le<double>(bytes, offset + i * 8));
    }
  }
  return Tensor<T>(h.shape, std::move(data));
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void write_stns(const std::filesystem::path& path, const Tensor<T>& t) {
  write_file_bytes(path, encode_stns(t));
}

template <typename T>
Tensor<T> read_stns(const std::filesystem::path& path) {
  return decode_stns<T>(read_file_bytes(path));
}

template std::string encode_stns<float>(const Tensor<float>&);
template std::string encode_stns<double>(const Tensor<double>&);
template Tensor<float> decode_stns<float>(std::string_view);
template Tensor<double> decode_stns<double>(std::string_view);
template void write_stns<float>(const std::filesystem::path&, const Tensor<float>&);
template void write_stns<double>(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> read_stns<float>(const std::filesystem::path&);
template Tensor<double> read_stns<double>(const std::filesystem::path&);

}  // namespace smoothsal
