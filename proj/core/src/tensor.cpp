// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smoothsal/errors.hpp"

namespace smoothsal {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a) +
                         " does not match " + shape_string(b));
  }
}

namespace {

void check_extents(const Shape& shape) {
  for (auto e : shape) {
    if (e < 1) throw DimensionError("tensor extents must be >= 1, got " + shape_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw DimensionError("axis out of range for shape " + shape_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

template <typename T>
T& Tensor<T>::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
  return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

template <typename T>
const T& Tensor<T>::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
  return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& other) {
  require_same_shape(acc.shape(), other.shape(), "add_into");
  auto a = acc.data();
  auto b = other.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
T sum(const Tensor<T>& t) {
  T s = 0;
  for (T v : t.data()) s += v;
  return s;
}

template <typename T>
T max_abs(const Tensor<T>& t) {
  T m = 0;
  for (T v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  T m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  T s = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& t, std::int64_t first, std::int64_t count) {
  if (t.rank() < 1 || first < 0 || count < 1 || first + count > t.dim(0)) {
    throw DimensionError("slice_batch out of range for shape " + shape_string(t.shape()));
  }
  const std::int64_t row = t.numel() / t.dim(0);
  Shape s = t.shape();
  s[0] = count;
  std::vector<T> out(t.storage().begin() + first * row, t.storage().begin() + (first + count) * row);
  return Tensor<T>(std::move(s), std::move(out));
}

template <typename T>
Tensor<T> gather_batch(const Tensor<T>& t, std::span<const std::int64_t> rows) {
  if (rows.empty()) throw DimensionError("gather_batch: no rows");
  const std::int64_t row = t.numel() / t.dim(0);
  Shape s = t.shape();
  s[0] = static_cast<std::int64_t>(rows.size());
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(row) * rows.size());
  for (auto r : rows) {
    if (r < 0 || r >= t.dim(0)) throw DimensionError("gather_batch: row out of range");
    out.insert(out.end(), t.storage().begin() + r * row, t.storage().begin() + (r + 1) * row);
  }
  return Tensor<T>(std::move(s), std::move(out));
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_batch: no parts");
  Shape s = parts[0].shape();
  std::int64_t n = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    Shape tail_a(s.begin() + 1, s.end());
    Shape tail_b(p.shape().begin() + 1, p.shape().end());
    require_same_shape(tail_a, tail_b, "concat_batch");
    n += p.dim(0);
    out.insert(out.end(), p.storage().begin(), p.storage().end());
  }
  s[0] = n;
  return Tensor<T>(std::move(s), std::move(out));
}

#define SMOOTHSAL_INSTANTIATE(T)                                                     \
  template class Tensor<T>;                                                          \
  template void add_into<T>(Tensor<T>&, const Tensor<T>&);                           \
  template T sum<T>(const Tensor<T>&);                                               \
  template T max_abs<T>(const Tensor<T>&);                                           \
  template T max_abs_diff<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template T dot<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> slice_batch<T>(const Tensor<T>&, std::int64_t, std::int64_t);   \
  template Tensor<T> gather_batch<T>(const Tensor<T>&, std::span<const std::int64_t>); \
  template Tensor<T> concat_batch<T>(std::span<const Tensor<T>>);

SMOOTHSAL_INSTANTIATE(float)
SMOOTHSAL_INSTANTIATE(double)

}  // namespace smoothsal
