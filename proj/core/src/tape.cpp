// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "smoothsal/tape.hpp"

#include <string>

#include "smoothsal/errors.hpp"

namespace smoothsal {

template <typename T>
void Tape<T>::check_owned(Var<T> v, const char* what) const {
  if (v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw UsageError(std::string(what) + ": variable is not on this tape");
  }
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad});
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward) {
#ifndef NDEBUG
  if (!value.all_finite()) throw NumericError("non-finite value produced by a tape op");
#endif
  Node node{std::move(value), {}, nullptr, false};
  node.parents.reserve(parents.size());
  for (const auto& p : parents) {
    check_owned(p, "record");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(p.id())].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Tape<T>::watch(Var<T> v) {
  check_owned(v, "watch");
  Node node{nodes_[static_cast<std::size_t>(v.id())].value, {v.id()}, nullptr, true};
  node.backward = [](Context& ctx) {
    if (ctx.needs(0)) ctx.accumulate(0, ctx.grad_output());
  };
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
bool Tape<T>::requires_grad(Var<T> v) const {
  check_owned(v, "requires_grad");
  return nodes_[static_cast<std::size_t>(v.id())].requires_grad;
}

template <typename T>
void Tape<T>::accumulate(int id, Tensor<T> grad) {
  auto& slot = grads_[static_cast<std::size_t>(id)];
  require_same_shape(nodes_[static_cast<std::size_t>(id)].value.shape(), grad.shape(),
                     "gradient accumulation");
  if (!slot) {
    slot = std::move(grad);
  } else {
    add_into(*slot, grad);
  }
}

template <typename T>
void Tape<T>::backward(Var<T> root) {
  check_owned(root, "backward");
  const auto& v = root.value();
  if (v.numel() != 1) {
    throw UsageError("backward: root must be a scalar, got shape " + shape_string(v.shape()));
  }
  backward(root, Tensor<T>::ones(v.shape()));
}

template <typename T>
void Tape<T>::backward(Var<T> root, Tensor<T> seed) {
  check_owned(root, "backward");
  require_same_shape(root.value().shape(), seed.shape(), "backward seed");
  grads_.assign(nodes_.size(), std::nullopt);
  visited_.clear();
  grads_[static_cast<std::size_t>(root.id())] = std::move(seed);
  for (int id = root.id(); id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    auto& g = grads_[static_cast<std::size_t>(id)];
    if (!g || !node.requires_grad) continue;
    visited_.push_back(id);
    if (node.backward) {
      Context ctx(this, id, &*g);
      node.backward(ctx);
    }
  }
}

template <typename T>
bool Tape<T>::has_grad(Var<T> v) const {
  check_owned(v, "has_grad");
  const auto i = static_cast<std::size_t>(v.id());
  return i < grads_.size() && grads_[i].has_value();
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var<T> v) const {
  if (!has_grad(v)) throw UsageError("no gradient recorded for node " + std::to_string(v.id()));
  return *grads_[static_cast<std::size_t>(v.id())];
}

template class Tape<float>;
template class Tape<double>;

}  // namespace smoothsal
