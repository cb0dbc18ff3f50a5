// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <initializer_list>
#include <optional>
#include <vector>

#include "smoothsal/tensor.hpp"

namespace smoothsal {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; the tape must outlive it.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

/// Append-only record of a forward computation for reverse-mode AD.
///
/// Nodes are stored in insertion order, which is a topological order since a
/// node's parents must already be on the tape. A node whose parents all lack
/// `requires_grad` drops its backward closure at record time, so frozen
/// prefixes of a network cost nothing in the backward pass.
///
/// One tape per evaluation; a Tape is not thread-safe.
template <typename T>
class Tape {
 public:
  class Context {
   public:
    const Tensor<T>& grad_output() const { return *grad_out_; }
    const Tensor<T>& output() const { return tape_->nodes_[node_].value; }
    const Tensor<T>& input(std::size_t k) const {
      return tape_->nodes_[parent(k)].value;
    }
    bool needs(std::size_t k) const { return tape_->nodes_[parent(k)].requires_grad; }
    void accumulate(std::size_t k, Tensor<T> grad) { tape_->accumulate(parent(k), std::move(grad)); }

   private:
    friend class Tape;
    Context(Tape* tape, int node, const Tensor<T>* grad_out)
        : tape_(tape), node_(node), grad_out_(grad_out) {}
    int parent(std::size_t k) const { return tape_->nodes_[node_].parents.at(k); }

    Tape* tape_;
    int node_;
    const Tensor<T>* grad_out_;
  };

  using BackwardFn = std::function<void(Context&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward);
  // Identity node that always requires grad, so gradients w.r.t. an
  // intermediate value are retrievable even when nothing upstream is trainable.
  Var<T> watch(Var<T> v);

  bool requires_grad(Var<T> v) const;

  // Seeds d(root)/d(root) = 1; root must hold exactly one element.
  void backward(Var<T> root);
  // Seeds with an explicit upstream gradient of root's shape.
  void backward(Var<T> root, Tensor<T> seed);

  bool has_grad(Var<T> v) const;
  const Tensor<T>& grad(Var<T> v) const;

  const Tensor<T>& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  std::size_t size() const { return nodes_.size(); }
  // Node ids processed by the most recent backward, in visiting order.
  const std::vector<int>& last_backward_order() const { return visited_; }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var<T> v, const char* what) const;
  void accumulate(int id, Tensor<T> grad);

  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor<T>>> grads_;
  std::vector<int> visited_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

}  // namespace smoothsal
