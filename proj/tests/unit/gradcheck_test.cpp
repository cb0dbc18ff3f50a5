// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

// Central-difference checks of every differentiable tape op and of a full
// model forward, in double precision.

#include <gtest/gtest.h>

#include <functional>
#include <string>
#include <vector>

#include "smoothsal/model.hpp"
#include "smoothsal/ops.hpp"
#include "test_support.hpp"

namespace smoothsal {
namespace {

using testing::check_gradients;
using testing::project;
using testing::random_tensor;
using testing::random_tensor_off_zero;
using testing::ScalarFn;

constexpr int kTrials = 20;
constexpr double kTolerance = 1e-5;

struct Case {
  std::vector<Tensor<double>> inputs;
  ScalarFn fn;
};

using CaseFactory = std::function<Case(Rng&, int trial)>;

int draw(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void run_cases(const CaseFactory& make, std::uint64_t seed) {
  Rng rng(seed);
  for (int trial = 0; trial < kTrials; ++trial) {
    Case c = make(rng, trial);
    const auto result = check_gradients(c.fn, c.inputs);
    EXPECT_GT(result.checked, 0);
    EXPECT_LT(result.max_rel_error, kTolerance) << "trial " << trial;
  }
}

Shape random_nchw(Rng& rng, int max_extent = 6) {
  return {draw(rng, 1, 2), draw(rng, 1, 3), draw(rng, 2, max_extent), draw(rng, 2, max_extent)};
}

Shape even_nchw(Rng& rng) {
  return {draw(rng, 1, 2), draw(rng, 1, 3), 2 * draw(rng, 1, 4), 2 * draw(rng, 1, 4)};
}

TEST(GradCheck, Conv2d) {
  run_cases(
      [](Rng& rng, int trial) {
        const int k = draw(rng, 1, 3);
        const Conv2dGeometry geom{draw(rng, 1, 2), draw(rng, 0, 2)};
        const std::int64_t c = draw(rng, 1, 3), o = draw(rng, 1, 3);
        const auto x = random_tensor(rng, {draw(rng, 1, 2), c, k + draw(rng, 0, 4), k + draw(rng, 0, 4)});
        const bool with_bias = trial % 2 == 0;
        std::vector<Tensor<double>> in{x, random_tensor(rng, {o, c, k, k})};
        if (with_bias) in.push_back(random_tensor(rng, {o}));
        const auto seed = static_cast<std::uint64_t>(trial);
        return Case{in, [with_bias, geom, seed](Tape<double>& t, const std::vector<Var<double>>& v) {
                      std::optional<Var<double>> b;
                      if (with_bias) b = v[2];
                      return project(t, conv2d(v[0], v[1], b, geom), seed);
                    }};
      },
      101);
}

TEST(GradCheck, ReluAwayFromKink) {
  run_cases(
      [](Rng& rng, int trial) {
        return Case{{random_tensor_off_zero(rng, random_nchw(rng))},
                    [trial](Tape<double>& t, const std::vector<Var<double>>& v) {
                      return project(t, relu(v[0]), trial);
                    }};
      },
      102);
}

TEST(GradCheck, Arithmetic) {
  run_cases(
      [](Rng& rng, int trial) {
        const Shape s = random_nchw(rng);
        return Case{{random_tensor(rng, s), random_tensor(rng, s), random_tensor_off_zero(rng, s)},
                    [trial](Tape<double>& t, const std::vector<Var<double>>& v) {
                      Var<double> a = add(mul(v[0], v[1]), scale(sub(v[1], v[0]), 0.7));
                      return project(t, add(a, abs(v[2])), trial);
                    }};
      },
      103);
}

TEST(GradCheck, SigmoidSoftmaxSumMean) {
  run_cases(
      [](Rng& rng, int trial) {
        const Shape s{draw(rng, 1, 4), draw(rng, 2, 6)};
        return Case{{random_tensor(rng, s, -3, 3)}, [trial](Tape<double>& t, const std::vector<Var<double>>& v) {
                      Var<double> a = project(t, softmax(v[0]), trial);
                      Var<double> b = project(t, sigmoid(v[0]), trial + 1000);
                      return add(add(a, b), add(scale(sum(v[0]), 0.1), mean(mul(v[0], v[0]))));
                    }};
      },
      104);
}

TEST(GradCheck, Linear) {
  run_cases(
      [](Rng& rng, int trial) {
        const std::int64_t n = draw(rng, 1, 3), f = draw(rng, 1, 5), o = draw(rng, 1, 4);
        return Case{{random_tensor(rng, {n, f}), random_tensor(rng, {o, f}), random_tensor(rng, {o})},
                    [trial](Tape<double>& t, const std::vector<Var<double>>& v) {
                      return project(t, linear(v[0], v[1], std::optional<Var<double>>(v[2])), trial);
                    }};
      },
      105);
}

TEST(GradCheck, Pooling) {
  run_cases(
      [](Rng& rng, int trial) {
        return Case{{random_tensor(rng, even_nchw(rng))}, [trial](Tape<double>& t, const std::vector<Var<double>>& v) {
                      Var<double> a = project(t, max_pool_2x(v[0]), trial);
                      Var<double> b = project(t, bilinear_down2x(v[0]), trial + 1000);
                      return add(a, add(b, project(t, global_average_pool(v[0]), trial + 2000)));
                    }};
      },
      106);
}

TEST(GradCheck, ResamplingAndRoll) {
  run_cases(
      [](Rng& rng, int trial) {
        const Shape s = random_nchw(rng, 7);
        const std::int64_t oh = draw(rng, 1, 12), ow = draw(rng, 1, 12);
        const RollOffset r{draw(rng, -8, 8), draw(rng, -8, 8)};
        return Case{{random_tensor(rng, s)}, [=](Tape<double>& t, const std::vector<Var<double>>& v) {
                      Var<double> a = project(t, bilinear_upsample(v[0], oh, ow), trial);
                      return add(a, project(t, roll2d(v[0], r), trial + 1000));
                    }};
      },
      107);
}

TEST(GradCheck, GaussianBlur) {
  run_cases(
      [](Rng& rng, int trial) {
        const int size = 2 * draw(rng, 0, 2) + 1;
        const Shape s{1, draw(rng, 1, 2), size + draw(rng, 0, 4), size + draw(rng, 0, 4)};
        const double sigma = 0.5 + 0.1 * draw(rng, 0, 20);
        return Case{{random_tensor(rng, s)}, [=](Tape<double>& t, const std::vector<Var<double>>& v) {
                      return project(t, gaussian_blur2d(v[0], size, sigma), trial);
                    }};
      },
      108);
}

TEST(GradCheck, ChannelAffineAndBatchNorm) {
  run_cases(
      [](Rng& rng, int trial) {
        Shape s = random_nchw(rng);
        s[0] = 2;
        const std::int64_t c = s[1];
        return Case{{random_tensor(rng, s), random_tensor(rng, {c}), random_tensor(rng, {c})},
                    [trial](Tape<double>& t, const std::vector<Var<double>>& v) {
                      Var<double> a = project(t, channel_affine(v[0], v[1], v[2]), trial);
                      return add(a, project(t, batch_norm(v[0], v[1], v[2], 1e-5), trial + 1000));
                    }};
      },
      109);
}

TEST(GradCheck, PickAndLosses) {
  run_cases(
      [](Rng& rng, int) {
        const std::int64_t n = draw(rng, 1, 4), k = draw(rng, 2, 5);
        std::vector<std::int64_t> labels, binary;
        for (std::int64_t i = 0; i < n; ++i) {
          labels.push_back(draw(rng, 0, static_cast<int>(k) - 1));
          binary.push_back(draw(rng, 0, 1));
        }
        const Tensor<double> target = random_tensor(rng, {n, k});
        Tensor<double> z = random_tensor(rng, {n, k}, -3, 3);
        // Keep l1 away from its kink.
        for (std::int64_t i = 0; i < z.numel(); ++i) {
          if (std::abs(z[i] - target[i]) < 0.05) z[i] += 0.1;
        }
        return Case{{z, random_tensor(rng, {n, 1}, -3, 3)},
                    [=](Tape<double>&, const std::vector<Var<double>>& v) {
                      Var<double> a = add(sum(pick(v[0], labels)), cross_entropy(v[0], labels));
                      return add(a, add(bce_with_logits(v[1], binary), l1_loss(v[0], target)));
                    }};
      },
      110);
}

// Finite differences through a whole mini-ResNet: input, every parameter
// tensor and a hidden stage output.
class ModelGradCheck : public ::testing::Test {
 protected:
  ModelGradCheck() {
    MiniResNetConfig cfg;
    cfg.image_size = 16;
    cfg.widths = {3, 4};
    cfg.blocks_per_stage = 1;
    cfg.classes = 3;
    model_ = build_mini_resnet<double>(cfg, 7);
    // Non-trivial batch-norm affines so no block is an exact identity.
    Rng rng(8);
    for (auto& [key, value] : model_.params) {
      if (key.ends_with(".scale")) value = random_tensor(rng, value.shape(), 0.5, 1.5);
      if (key.ends_with(".shift")) value = random_tensor(rng, value.shape(), -0.2, 0.2);
    }
    x_ = random_tensor(rng, {2, 3, 16, 16});
  }

  double loss(const ModelGraph<double>& m, const Tensor<double>& x, const ForwardOptions<double>& opt = {}) {
    Tape<double> tape;
    return project(tape, forward(m, tape, x, opt).logits, 99).value()[0];
  }

  ModelGraph<double> model_;
  Tensor<double> x_;
};

TEST_F(ModelGradCheck, InputAndParameters) {
  Tape<double> tape;
  ForwardOptions<double> opt;
  opt.capture = {std::string(kInputLayer)};
  opt.params_require_grad = true;
  const auto result = forward(model_, tape, x_, opt);
  tape.backward(project(tape, result.logits, 99));

  const double h = 1e-6;
  double worst = 0;
  const Tensor<double> gx = tape.grad(result.captured.at(std::string(kInputLayer)));
  for (std::int64_t i = 0; i < x_.numel(); i += 37) {
    Tensor<double> up = x_, down = x_;
    up[i] += h;
    down[i] -= h;
    worst = std::max(worst, testing::relative_error(gx[i], (loss(model_, up) - loss(model_, down)) / (2 * h)));
  }
  for (const auto& [key, var] : result.params) {
    const Tensor<double> g = tape.grad(var);
    const std::int64_t n = g.numel();
    for (std::int64_t i = 0; i < n; i += std::max<std::int64_t>(1, n / 7)) {
      ModelGraph<double> up = model_, down = model_;
      up.params.at(key)[i] += h;
      down.params.at(key)[i] -= h;
      const double numeric = (loss(up, x_) - loss(down, x_)) / (2 * h);
      const double err = testing::relative_error(g[i], numeric);
      EXPECT_LT(err, 1e-5) << key << "[" << i << "]";
      worst = std::max(worst, err);
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST_F(ModelGradCheck, HiddenStageOutput) {
  const std::string layer = model_.resolve("stage1.out");
  Tape<double> tape;
  ForwardOptions<double> opt;
  opt.capture = {layer};
  const auto result = forward(model_, tape, x_, opt);
  const Var<double> hidden = result.captured.at(layer);
  tape.backward(project(tape, result.logits, 99));
  const Tensor<double> g = tape.grad(hidden);
  const Tensor<double> a = hidden.value();

  const double h = 1e-6;
  for (std::int64_t i = 0; i < a.numel(); i += 11) {
    ForwardOptions<double> up, down;
    up.inject[layer] = a;
    up.inject[layer][i] += h;
    down.inject[layer] = a;
    down.inject[layer][i] -= h;
    const double numeric = (loss(model_, x_, up) - loss(model_, x_, down)) / (2 * h);
    EXPECT_LT(testing::relative_error(g[i], numeric), 1e-5) << i;
  }
}

}  // namespace
}  // namespace smoothsal
