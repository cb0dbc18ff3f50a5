// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace smoothsal {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class DType : std::uint8_t { float32 = 0x01, float64 = 0x02 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::float32; }
template <>
constexpr DType dtype_of<double>() { return DType::float64; }

/// Dense row-major N-d array. Shapes use N x C x H x W for image-like data.
///
/// Every extent is >= 1 and `numel() == data().size()`. A default-constructed
/// tensor is the only exception: it has rank 0 and no storage and is used as
/// an "absent" placeholder.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T{0}); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T{1}); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
  static Tensor from(Shape shape, std::initializer_list<T> values) {
    return Tensor(std::move(shape), std::vector<T>(values));
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  // Negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w);
  const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const;

  Tensor reshaped(Shape shape) const;
  template <typename U>
  Tensor<U> cast() const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  std::vector<U> out(data_.begin(), data_.end());
  return Tensor<U>(shape_, std::move(out));
}

// Free helpers used across modules; all require equal shapes where relevant.
template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& other);
template <typename T>
T sum(const Tensor<T>& t);
template <typename T>
T max_abs(const Tensor<T>& t);
template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b);

// Slice [first, first + count) along axis 0.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, std::int64_t first, std::int64_t count);
// Gather rows along axis 0.
template <typename T>
Tensor<T> gather_batch(const Tensor<T>& t, std::span<const std::int64_t> rows);
// Concatenate along axis 0; trailing extents must match.
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace smoothsal
