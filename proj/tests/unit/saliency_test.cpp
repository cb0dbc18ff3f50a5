// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "smoothsal/denoise.hpp"
#include "smoothsal/errors.hpp"
#include "smoothsal/model.hpp"
#include "smoothsal/saliency.hpp"
#include "test_support.hpp"

namespace smoothsal {
namespace {

using testing::random_tensor;

LayerSpec make_spec(std::string id, LayerKind kind, std::string input) {
  LayerSpec s;
  s.id = std::move(id);
  s.kind = kind;
  s.inputs = {std::move(input)};
  return s;
}

// input (C x H x W) -> conv (H x W kernel, 1 channel) -> gap -> linear (1 -> K).
// Every logit is affine in the input: z_k = v_k * <W, x> + b_k.
ModelGraph<double> affine_model(int c, int h, int w, const Tensor<double>& kernel, const Tensor<double>& v) {
  ModelGraph<double> m;
  m.input = {c, h, w};
  m.classes = static_cast<int>(v.numel());
  LayerSpec conv = make_spec("conv", LayerKind::conv, std::string(kInputLayer));
  conv.in_channels = c;
  conv.out_channels = 1;
  conv.kernel = h;
  add_layer(m, conv);
  add_layer(m, make_spec("pool", LayerKind::global_avg_pool, "conv"));
  LayerSpec fc = make_spec("fc", LayerKind::linear, "pool");
  fc.in_channels = 1;
  fc.out_channels = v.numel();
  fc.bias = true;
  add_layer(m, fc);
  m.param("conv", "weight") = kernel;
  m.param("fc", "weight") = v.reshaped({v.numel(), 1});
  for (std::int64_t k = 0; k < v.numel(); ++k) m.param("fc", "bias")[k] = 0.1 * static_cast<double>(k);
  m.validate();
  return m;
}

// f(x) = relu(x - 1) on a 1 x 1 x 1 input.
ModelGraph<double> shifted_relu_model() {
  ModelGraph<double> m;
  m.input = {1, 1, 1};
  m.classes = 1;
  LayerSpec conv = make_spec("conv", LayerKind::conv, std::string(kInputLayer));
  conv.in_channels = 1;
  conv.out_channels = 1;
  conv.kernel = 1;
  conv.bias = true;
  add_layer(m, conv);
  add_layer(m, make_spec("relu", LayerKind::relu, "conv"));
  add_layer(m, make_spec("pool", LayerKind::global_avg_pool, "relu"));
  LayerSpec fc = make_spec("fc", LayerKind::linear, "pool");
  fc.in_channels = 1;
  fc.out_channels = 1;
  fc.bias = true;
  add_layer(m, fc);
  m.param("conv", "weight")[0] = 1.0;
  m.param("conv", "bias")[0] = -1.0;
  m.param("fc", "weight")[0] = 1.0;
  m.param("fc", "bias")[0] = 0.0;
  m.validate();
  return m;
}

class AffineModel : public ::testing::Test {
 protected:
  AffineModel() {
    Rng rng(1);
    kernel_ = random_tensor(rng, {1, 3, 4, 4});
    v_ = Tensor<double>::from({3}, {0.5, -2.0, 1.5});
    model_ = affine_model(3, 4, 4, kernel_, v_);
    x_ = random_tensor(rng, {3, 4, 4});
  }

  // d z_t / d x = v_t * W.
  Tensor<double> expected_grad(std::int64_t t) const {
    Tensor<double> g = kernel_.reshaped({3, 4, 4});
    for (auto& e : g.data()) e *= v_[t];
    return g;
  }

  Tensor<double> kernel_, v_, x_;
  ModelGraph<double> model_;
};

TEST_F(AffineModel, GradientIsTheWeightProduct) {
  const auto view = attach(model_, HookMode::original);
  for (std::int64_t t = 0; t < 3; ++t) {
    AttributionRequest req;
    req.target = t;
    const auto raw = attribute_raw(view, x_, req, black_baseline(model_));
    EXPECT_LT(max_abs_diff(raw, expected_grad(t)), 1e-14);
  }
}

TEST_F(AffineModel, IntegratedGradientsAndDeepLiftAreInputTimesGradient) {
  const auto view = attach(model_, HookMode::original);
  Rng rng(2);
  const auto baseline = random_tensor(rng, {1, 3, 4, 4});
  for (SaliencyMethod method : {SaliencyMethod::ig, SaliencyMethod::deeplift}) {
    for (int steps : {1, 7, 32}) {
      AttributionRequest req;
      req.method = method;
      req.target = 1;
      req.ig_steps = steps;
      const auto raw = attribute_raw(view, x_, req, baseline);
      Tensor<double> expected = expected_grad(1);
      for (std::int64_t i = 0; i < expected.numel(); ++i) expected[i] *= x_[i] - baseline[i];
      EXPECT_LT(max_abs_diff(raw, expected), 1e-12) << to_string(method) << " steps " << steps;
    }
  }
}

TEST_F(AffineModel, BlackBaselineIsZeros) {
  EXPECT_EQ(black_baseline(model_), Tensor<double>({1, 3, 4, 4}));
}

TEST_F(AffineModel, TargetOutOfRangeIsUsageError) {
  const auto view = attach(model_, HookMode::original);
  AttributionRequest req;
  req.target = 3;
  EXPECT_THROW(attribute(view, x_, req), UsageError);
}

TEST(ShiftedRelu, ScalarAttributionsSumToTheOutputChange) {
  const auto m = shifted_relu_model();
  const auto view = attach(m, HookMode::original);
  const auto x = Tensor<double>::from({1, 1, 1}, {3.0});
  const auto base = black_baseline(m);

  AttributionRequest req;
  EXPECT_DOUBLE_EQ(attribute_raw(view, x, req, base)[0], 1.0);

  req.method = SaliencyMethod::deeplift;
  EXPECT_NEAR(attribute_raw(view, x, req, base)[0], 2.0, 1e-12);

  req.method = SaliencyMethod::ig;
  req.ig_steps = 3;
  EXPECT_NEAR(attribute_raw(view, x, req, base)[0], 2.0, 1e-12);
  for (int steps : {5, 32, 100}) {
    req.ig_steps = steps;
    // Right Riemann sum of x * 1[alpha x > 1] over alpha = k / steps.
    int active = 0;
    for (int k = 1; k <= steps; ++k) active += 3.0 * k / steps > 1.0 + 1e-12 ? 1 : 0;
    EXPECT_NEAR(attribute_raw(view, x, req, base)[0], 3.0 * active / steps, 1e-12) << steps;
  }
}

TEST(GradCam, SingleChannelIsScaledRectifiedActivation) {
  ModelGraph<double> m;
  m.input = {2, 4, 4};
  m.classes = 2;
  LayerSpec conv = make_spec("conv", LayerKind::conv, std::string(kInputLayer));
  conv.in_channels = 2;
  conv.out_channels = 1;
  conv.kernel = 3;
  conv.padding = 1;
  add_layer(m, conv);
  add_layer(m, make_spec("relu", LayerKind::relu, "conv"));
  add_layer(m, make_spec("pool", LayerKind::global_avg_pool, "relu"));
  LayerSpec fc = make_spec("fc", LayerKind::linear, "pool");
  fc.in_channels = 1;
  fc.out_channels = 2;
  fc.bias = true;
  add_layer(m, fc);
  Rng rng(3);
  m.param("conv", "weight") = random_tensor(rng, {1, 2, 3, 3});
  m.param("fc", "weight") = Tensor<double>::from({2, 1}, {2.0, -1.0});
  m.validate();
  ASSERT_EQ(m.last_spatial_layer(), "relu");

  const auto view = attach(m, HookMode::original);
  const auto x = random_tensor(rng, {2, 4, 4});
  const auto act = relu(conv2d<double>(x.reshaped({1, 2, 4, 4}), m.param("conv", "weight"), nullptr,
                                       Conv2dGeometry{1, 1}));
  AttributionRequest req;
  req.method = SaliencyMethod::gradcam;
  req.target = 0;
  const auto raw = attribute_raw(view, x, req, black_baseline(m));
  ASSERT_EQ(raw.shape(), (Shape{1, 4, 4}));
  // alpha = 2 / 16; the map is alpha * A, already non-negative.
  for (std::int64_t i = 0; i < 16; ++i) EXPECT_NEAR(raw[i], act[i] * 2.0 / 16.0, 1e-14);
  req.target = 1;
  EXPECT_EQ(attribute_raw(view, x, req, black_baseline(m)), Tensor<double>({1, 4, 4}));
  req.layer = "conv";
  EXPECT_THROW(attribute_raw(view, x, req, black_baseline(m)), UsageError);
}

TEST(SmoothGrad, SingleNoiselessSampleEqualsPlainMap) {
  const auto m = build_mini_resnet<double>([] {
    MiniResNetConfig c;
    c.image_size = 16;
    c.widths = {4, 4};
    c.blocks_per_stage = 1;
    return c;
  }(), 1);
  const auto view = attach(m, HookMode::original);
  Rng rng(4);
  const auto x = random_tensor(rng, {3, 16, 16});
  AttributionRequest req;
  req.target = 2;
  const auto plain = attribute(view, x, req);
  req.smoothgrad = SmoothGradConfig{1, 0.0, 5};
  const auto smooth = attribute(view, x, req);
  EXPECT_EQ(smooth.raw, plain.raw);
  EXPECT_EQ(smooth.rendered, plain.rendered);

  req.smoothgrad = SmoothGradConfig{4, 0.3, 5};
  const auto a = attribute(view, x, req);
  const auto b = attribute(view, x, req);
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_GT(max_abs_diff(a.raw, plain.raw), 0.0);
  req.smoothgrad = SmoothGradConfig{0, 0.3, 5};
  EXPECT_THROW(attribute(view, x, req), ConfigError);
  EXPECT_NE(smoothgrad_seed(1, 0), smoothgrad_seed(1, 1));
}

TEST(ReduceChannels, Modes) {
  const auto raw = Tensor<double>::from({2, 1, 2}, {1, -2, -3, 4});
  EXPECT_EQ(reduce_channels(raw, ChannelReduction::mean_abs), Tensor<double>::from({1, 2}, {2, 3}));
  EXPECT_EQ(reduce_channels(raw, ChannelReduction::mean), Tensor<double>::from({1, 2}, {-1, 1}));
  EXPECT_EQ(reduce_channels(raw, ChannelReduction::sum), Tensor<double>::from({1, 2}, {-2, 2}));
  EXPECT_EQ(channel_reduction_from_string("mean_abs"), ChannelReduction::mean_abs);
  EXPECT_THROW(reduce_channels(Tensor<double>({2, 2}), ChannelReduction::sum), DimensionError);
}

TEST(HiddenLayer, GradientMatchesFiniteDifferences) {
  MiniResNetConfig cfg;
  cfg.image_size = 16;
  cfg.widths = {4, 6};
  cfg.blocks_per_stage = 1;
  auto m = build_mini_resnet<double>(cfg, 5);
  Rng rng(5);
  for (auto& [key, value] : m.params) {
    if (key.ends_with(".scale")) value = random_tensor(rng, value.shape(), 0.5, 1.5);
  }
  const auto view = attach(m, HookMode::original);
  const auto x = random_tensor(rng, {3, 16, 16});
  AttributionRequest req;
  req.layer = "stage1.out";
  req.target = 1;
  const auto map = attribute(view, x, req);
  EXPECT_EQ(map.layer, "stage1.block1.out");
  EXPECT_EQ(map.raw.shape(), (Shape{4, 4, 4}));
  EXPECT_EQ(map.rendered.shape(), (Shape{16, 16}));

  Tape<double> tape;
  ForwardOptions<double> o;
  o.capture = {map.layer};
  const Tensor<double> a = forward(m, tape, x.reshaped({1, 3, 16, 16}), o).captured.at(map.layer).value();
  const double h = 1e-6;
  for (std::int64_t i = 0; i < a.numel(); i += 5) {
    ForwardOptions<double> up, down;
    up.inject[map.layer] = a;
    up.inject[map.layer][i] += h;
    down.inject[map.layer] = a;
    down.inject[map.layer][i] -= h;
    Tape<double> tu, td;
    const double fu = forward(m, tu, x.reshaped({1, 3, 16, 16}), up).logits.value()[1];
    const double fd = forward(m, td, x.reshaped({1, 3, 16, 16}), down).logits.value()[1];
    EXPECT_LT(testing::relative_error(map.raw[i], (fu - fd) / (2 * h)), 1e-5) << i;
  }
}

TEST(HiddenLayer, IntegratedGradientsCompleteness) {
  MiniResNetConfig cfg;
  cfg.image_size = 16;
  cfg.widths = {4, 6};
  cfg.blocks_per_stage = 1;
  const auto m = build_mini_resnet<double>(cfg, 6);
  const auto view = attach(m, HookMode::original);
  Rng rng(6);
  const auto x = random_tensor(rng, {3, 16, 16});
  AttributionRequest req;
  req.method = SaliencyMethod::ig;
  req.target = 0;
  req.ig_steps = 512;
  const auto base = black_baseline(m);
  const auto raw = attribute_raw(view, x, req, base);
  const double gap = predict_logits(m, x.reshaped({1, 3, 16, 16}))[0] - predict_logits(m, base)[0];
  EXPECT_NEAR(sum(raw), gap, 0.02 * std::abs(gap) + 1e-3);
}

}  // namespace
}  // namespace smoothsal
