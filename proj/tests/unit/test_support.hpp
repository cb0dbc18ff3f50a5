// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// Helpers shared by the test suites: seeded random tensors, a finite-difference
// gradient checker and a scratch-directory fixture.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "smoothsal/ops.hpp"
#include "smoothsal/random.hpp"
#include "smoothsal/tape.hpp"
#include "smoothsal/tensor.hpp"

namespace smoothsal::testing {

inline Tensor<double> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Values bounded away from zero so a +-1e-5 probe never crosses a ReLU kink.
inline Tensor<double> random_tensor_off_zero(Rng& rng, Shape shape) {
  Tensor<double> t = random_tensor(rng, std::move(shape));
  for (auto& v : t.data()) v = v < 0 ? v - 0.05 : v + 0.05;
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::int64_t checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// Central differences with step h on every element of every input (or at most
// `max_per_input` evenly spaced elements) against one reverse pass.
inline GradCheck check_gradients(const ScalarFn& f, std::vector<Tensor<double>> inputs, double h = 1e-5,
                                 std::int64_t max_per_input = 200) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, true));
  tape.backward(f(tape, vars));

  auto eval = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> t;
    std::vector<Var<double>> vs;
    for (const auto& x : xs) vs.push_back(t.leaf(x, false));
    return f(t, vs).value()[0];
  };

  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double> analytic =
        tape.has_grad(vars[k]) ? tape.grad(vars[k]) : Tensor<double>(inputs[k].shape());
    const std::int64_t n = inputs[k].numel();
    const std::int64_t stride = std::max<std::int64_t>(1, n / max_per_input);
    for (std::int64_t i = 0; i < n; i += stride) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + h;
      const double up = eval(inputs);
      inputs[k][i] = saved - h;
      const double down = eval(inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[i], numeric));
      ++out.checked;
    }
  }
  return out;
}

// Random projection <out, r> turning any op output into a scalar loss.
inline Var<double> project(Tape<double>& tape, Var<double> out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, tape.leaf(random_tensor(rng, out.shape()))));
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("smoothsal_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace smoothsal::testing
