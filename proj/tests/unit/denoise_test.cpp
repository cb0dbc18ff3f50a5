// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "smoothsal/denoise.hpp"
#include "smoothsal/errors.hpp"
#include "smoothsal/model.hpp"
#include "test_support.hpp"

namespace smoothsal {
namespace {

using testing::random_tensor;

// Period-2 map with cell values a, b / c, d.
Tensor<double> period2(std::int64_t n, double a, double b, double c, double d) {
  Tensor<double> t({1, 1, n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) t.at(0, 0, i, j) = i % 2 == 0 ? (j % 2 == 0 ? a : b) : (j % 2 == 0 ? c : d);
  return t;
}

// Mean of g[(i - dh) mod H, (j - dw) mod W] over the offsets, by direct indexing.
Tensor<double> roll_mean_reference(const Tensor<double>& g, const std::vector<RollOffset>& offsets) {
  Tensor<double> out(g.shape());
  const auto h = g.dim(2), w = g.dim(3);
  for (std::int64_t n = 0; n < g.dim(0); ++n)
    for (std::int64_t c = 0; c < g.dim(1); ++c)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) {
          double acc = 0;
          for (const auto& d : offsets) acc += g.at(n, c, ((i - d.dh) % h + h) % h, ((j - d.dw) % w + w) % w);
          out.at(n, c, i, j) = acc / static_cast<double>(offsets.size());
        }
  return out;
}

Var<double> plain_conv(Var<double> x, Var<double> w, Conv2dGeometry g) {
  return conv2d(x, w, std::optional<Var<double>>{}, g);
}

TEST(HookMode, Parsing) {
  EXPECT_EQ(hook_mode_from_string("original"), HookMode::original);
  EXPECT_EQ(hook_mode_from_string("backward"), HookMode::backward_hook);
  EXPECT_EQ(hook_mode_from_string("forward_hook"), HookMode::forward_hook);
  EXPECT_EQ(hook_mode_from_string("surrogate"), HookMode::surrogate);
  EXPECT_THROW(hook_mode_from_string("sideways"), ConfigError);
}

TEST(RollSet, Validation) {
  RollSet r;
  EXPECT_NO_THROW(r.validate());
  r.forward.pop_back();
  EXPECT_THROW(r.validate(), ConfigError);
  r = RollSet{};
  r.backward[0] = {1, 1};
  EXPECT_THROW(r.validate(), ConfigError);
  const RollSet lit = RollSet::literal();
  EXPECT_EQ(lit.forward.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(lit.backward[i].dh, lit.forward[i].dh);
    EXPECT_EQ(lit.backward[i].dw, lit.forward[i].dw);
  }
}

TEST(BackwardHook, FlattensCheckerboardToItsMean) {
  const auto g = period2(16, 1, 1, 1, -1);
  EXPECT_EQ(backward_hook(g, RollSet{}), Tensor<double>::full({1, 1, 16, 16}, 0.5));
  EXPECT_EQ(backward_hook(g, RollSet::literal()), Tensor<double>::full({1, 1, 16, 16}, 0.5));
  const auto h = period2(8, 3, -2, 0.25, 7);
  EXPECT_LT(max_abs_diff(backward_hook(h, RollSet{}), Tensor<double>::full({1, 1, 8, 8}, 2.0625)), 1e-15);
}

TEST(BackwardHook, MatchesIndexOracle) {
  Rng rng(1);
  const auto g = random_tensor(rng, {2, 3, 6, 8});
  const RollSet rolls;
  EXPECT_LT(max_abs_diff(backward_hook(g, rolls), roll_mean_reference(g, rolls.backward)), 1e-15);
  const RollSet lit = RollSet::literal();
  EXPECT_LT(max_abs_diff(backward_hook(g, lit), roll_mean_reference(g, lit.forward)), 1e-15);
  // The conventions differ on maps that are not 2-periodic.
  EXPECT_GT(max_abs_diff(backward_hook(g, rolls), backward_hook(g, lit)), 1e-3);
}

TEST(GradRollAverage, IdentityForwardAveragedBackward) {
  Rng rng(2);
  const auto x = random_tensor(rng, {1, 2, 4, 6});
  const auto r = random_tensor(rng, {1, 2, 4, 6});
  Tape<double> tape;
  Var<double> v = tape.leaf(x, true);
  const RollSet rolls;
  Var<double> y = grad_roll_average(v, rolls.backward);
  EXPECT_EQ(y.value(), x);
  tape.backward(sum(mul(y, tape.leaf(r))));
  EXPECT_LT(max_abs_diff(tape.grad(v), roll_mean_reference(r, rolls.backward)), 1e-15);
}

TEST(ForwardHook, CheckerboardExample) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>::ones({1, 1, 16, 16}), true);
  Var<double> k = tape.leaf(Tensor<double>::from({1, 1, 2, 2}, {1, 1, 1, -1}));
  Var<double> y = forward_hook(x, k, std::optional<Var<double>>{}, Conv2dGeometry{2, 0}, RollSet{});
  EXPECT_EQ(y.value(), Tensor<double>::full({1, 1, 8, 8}, 2.0));
  tape.backward(sum(y));
  EXPECT_EQ(tape.grad(x), Tensor<double>::full({1, 1, 16, 16}, 0.5));
}

TEST(ForwardHook, MatchesRolledConvOracle) {
  Rng rng(3);
  const auto x = random_tensor(rng, {2, 2, 8, 6});
  const auto w = random_tensor(rng, {3, 2, 3, 3});
  const auto b = random_tensor(rng, {3});
  const Conv2dGeometry g{2, 1};
  Tape<double> tape;
  const RollSet rolls;
  const Tensor<double> got =
      forward_hook(tape.leaf(x), tape.leaf(w), std::optional<Var<double>>(tape.leaf(b)), g, rolls).value();
  Tensor<double> expected(got.shape());
  for (const auto& d : rolls.forward) add_into(expected, conv2d(roll2d(x, d), w, &b, g));
  for (auto& v : expected.data()) v *= 0.25;
  EXPECT_LT(max_abs_diff(got, expected), 1e-12);
}

// The forward hook's autodiff input gradient equals the backward hook applied
// to the plain conv's input gradient.
TEST(ForwardHook, GradientEqualsBackwardHookOnRandomConfigs) {
  Rng rng(4);
  auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int trial = 0; trial < 60; ++trial) {
    const int k = draw(1, 3);
    const Conv2dGeometry g{draw(1, 2), draw(0, 1)};
    const std::int64_t c = draw(1, 3), o = draw(1, 3);
    const std::int64_t h = 2 * draw(2, 5), w = 2 * draw(2, 5);
    const auto x = random_tensor(rng, {draw(1, 2), c, h, w});
    const auto wt = random_tensor(rng, {o, c, k, k});
    const auto y_shape = conv2d<double>(x, wt, nullptr, g).shape();
    const auto r = random_tensor(rng, y_shape);

    Tape<double> plain;
    Var<double> xp = plain.leaf(x, true);
    plain.backward(sum(mul(plain_conv(xp, plain.leaf(wt), g), plain.leaf(r))));

    Tape<double> hooked;
    Var<double> xh = hooked.leaf(x, true);
    Var<double> yh = forward_hook(xh, hooked.leaf(wt), std::optional<Var<double>>{}, g, RollSet{});
    hooked.backward(sum(mul(yh, hooked.leaf(r))));

    EXPECT_LT(max_abs_diff(hooked.grad(xh), backward_hook(plain.grad(xp), RollSet{})), 1e-12)
        << "trial " << trial;
  }
}

TEST(ForwardHook, RejectsOddExtents) {
  Tape<double> tape;
  EXPECT_THROW(forward_hook(tape.leaf(Tensor<double>({1, 1, 5, 4})), tape.leaf(Tensor<double>({1, 1, 3, 3})),
                            std::optional<Var<double>>{}, Conv2dGeometry{2, 1}, RollSet{}),
               DimensionError);
}

MiniResNetConfig tiny_config() {
  MiniResNetConfig cfg;
  cfg.image_size = 16;
  cfg.widths = {4, 6};
  cfg.blocks_per_stage = 1;
  cfg.classes = 3;
  return cfg;
}

TEST(Surrogate, GeometryAndInit) {
  const auto m = build_mini_resnet<double>(tiny_config(), 1);
  EXPECT_NO_THROW(require_surrogate_geometry(m.layer("stage1.block1.conv1")));
  EXPECT_THROW(require_surrogate_geometry(m.layer("stage2.block1.skip_conv")), ConfigError);
  EXPECT_THROW(require_surrogate_geometry(m.layer("stage1.block1.conv2")), ConfigError);

  const auto p = init_surrogate(m, "stage2.block1.conv1", 5);
  EXPECT_EQ(p.in_channels, 4);
  EXPECT_EQ(p.out_channels, 6);
  EXPECT_EQ(p.params.at("post.weight"), m.param("stage2.block1.conv1", "weight"));
  EXPECT_EQ(p.params.at("post.bias"), Tensor<double>({6}));
  EXPECT_EQ(p.params.at("pre.bias"), Tensor<double>({4}));
  const auto& pre = p.params.at("pre.weight");
  ASSERT_EQ(pre.shape(), (Shape{4, 4, 3, 3}));
  double sq = 0;
  for (std::int64_t o = 0; o < 4; ++o)
    for (std::int64_t i = 0; i < 4; ++i)
      for (std::int64_t a = 0; a < 3; ++a)
        for (std::int64_t b = 0; b < 3; ++b) {
          const double dirac = (o == i && a == 1 && b == 1) ? 1.0 : 0.0;
          sq += std::pow(pre.at(o, i, a, b) - dirac, 2);
        }
  const double noise_std = std::sqrt(sq / 144.0);
  EXPECT_GT(noise_std, 0.006);
  EXPECT_LT(noise_std, 0.014);
  EXPECT_EQ(init_surrogate(m, "stage2.block1.conv1", 5).params, p.params);
}

TEST(Surrogate, ForwardIsConvDownConv) {
  const auto m = build_mini_resnet<double>(tiny_config(), 2);
  const auto p = init_surrogate(m, "stage2.block1.conv1", 2);
  Rng rng(2);
  const auto x = random_tensor(rng, {2, 4, 8, 8});
  const Conv2dGeometry same{1, 1};
  const auto h = bilinear_down2x(conv2d(x, p.params.at("pre.weight"), &p.params.at("pre.bias"), same));
  const auto expected = conv2d(h, p.params.at("post.weight"), &p.params.at("post.bias"), same);
  EXPECT_LT(max_abs_diff(surrogate_forward(p, x), expected), 1e-12);
  EXPECT_THROW(surrogate_forward(p, Tensor<double>({1, 3, 8, 8})), DimensionError);
}

// A 3x3 stride-2 padding-1 conv whose kernel averages the 2x2 block at its
// centre equals bilinear_down2x; Dirac pre/post surrogates reproduce it.
TEST(Surrogate, RepresentsBlockAveragingConvExactly) {
  const std::int64_t c = 3;
  Tensor<double> w({c, c, 3, 3});
  Tensor<double> dirac({c, c, 3, 3});
  for (std::int64_t k = 0; k < c; ++k) {
    for (int a = 1; a < 3; ++a)
      for (int b = 1; b < 3; ++b) w.at(k, k, a, b) = 0.25;
    dirac.at(k, k, 1, 1) = 1.0;
  }
  SurrogatePath<double> p;
  p.target = "conv";
  p.in_channels = c;
  p.out_channels = c;
  p.params = {{"pre.weight", dirac}, {"pre.bias", Tensor<double>({c})},
              {"post.weight", dirac}, {"post.bias", Tensor<double>({c})}};
  Rng rng(3);
  const auto x = random_tensor(rng, {2, c, 8, 8});
  const auto conv = conv2d<double>(x, w, nullptr, Conv2dGeometry{2, 1});
  EXPECT_LT(max_abs_diff(surrogate_forward(p, x), conv), 1e-12);
}

TEST(Surrogate, SaveLoadRoundTrip) {
  testing::ScratchDir dir("surrogate");
  const auto m = build_mini_resnet<float>(tiny_config(), 3);
  SurrogateMap<float> paths;
  for (const auto& id : list_downsampling_convs(m).eligible) {
    auto p = init_surrogate(m, id, 3);
    p.epoch_loss = {0.5, 0.25};
    p.final_l1 = 0.2;
    paths.emplace(id, p);
  }
  save_surrogates(paths, dir.path());
  const auto loaded = load_surrogates<float>(dir.path());
  ASSERT_EQ(loaded.size(), paths.size());
  for (const auto& [id, p] : paths) {
    EXPECT_EQ(loaded.at(id).params, p.params);
    EXPECT_EQ(loaded.at(id).epoch_loss, p.epoch_loss);
    EXPECT_EQ(loaded.at(id).final_l1, p.final_l1);
    EXPECT_EQ(loaded.at(id).target, id);
  }
  EXPECT_TRUE(load_surrogates<float>(dir.path() / "none").empty());
}

TEST(Surrogate, TrainingReducesL1AndIsDeterministic) {
  const auto m = build_mini_resnet<double>(tiny_config(), 4);
  Rng rng(4);
  LabeledImages<double> data{random_tensor(rng, {16, 3, 16, 16}), std::vector<std::int64_t>(16, 0)};
  SurrogateTrainOptions opt;
  opt.epochs = 4;
  opt.batch_size = 8;
  opt.adam.lr = 1e-2;
  opt.seed = 9;
  const auto a = train_surrogates(m, data, opt);
  const auto b = train_surrogates(m, data, opt);
  ASSERT_EQ(a.size(), list_downsampling_convs(m).eligible.size());
  for (const auto& [id, p] : a) {
    ASSERT_EQ(p.epoch_loss.size(), 4u);
    EXPECT_LT(p.epoch_loss.back(), p.epoch_loss.front()) << id;
    EXPECT_TRUE(std::isfinite(p.final_l1));
    EXPECT_EQ(p.params, b.at(id).params);
  }
}

class ModelViewTest : public ::testing::Test {
 protected:
  ModelViewTest() : model_(build_mini_resnet<double>(tiny_config(), 6)) {
    Rng rng(6);
    // Residual branches start at zero; give them weight so hooked convs matter.
    for (auto& [key, value] : model_.params) {
      if (key.ends_with(".scale")) value = random_tensor(rng, value.shape(), 0.5, 1.5);
    }
    x_ = random_tensor(rng, {2, 3, 16, 16});
    auto paths = std::make_shared<SurrogateMap<double>>();
    for (const auto& id : list_downsampling_convs(model_).eligible) paths->emplace(id, init_surrogate(model_, id, 6));
    surrogates_ = paths;
  }

  Tensor<double> input_gradient(const ModelView<double>& view) {
    Tape<double> tape;
    ForwardOptions<double> opt;
    opt.capture = {std::string(kInputLayer)};
    const auto r = view.forward(tape, x_, opt);
    tape.backward(sum(pick(r.logits, std::vector<std::int64_t>{0, 1})));
    return tape.grad(r.captured.at(std::string(kInputLayer)));
  }

  ModelGraph<double> model_;
  Tensor<double> x_;
  std::shared_ptr<const SurrogateMap<double>> surrogates_;
};

TEST_F(ModelViewTest, OriginalModeIsThePlainModel) {
  const auto view = attach(model_, HookMode::original);
  EXPECT_TRUE(view.modified_convs().empty());
  EXPECT_EQ(view.logits(x_), predict_logits(model_, x_));
}

TEST_F(ModelViewTest, BackwardHookKeepsLogitsAndChangesGradients) {
  const auto plain = attach(model_, HookMode::original);
  const auto view = attach(model_, HookMode::backward_hook);
  EXPECT_EQ(view.modified_convs(), list_downsampling_convs(model_).eligible);
  EXPECT_EQ(view.logits(x_), plain.logits(x_));
  EXPECT_GT(max_abs_diff(input_gradient(view), input_gradient(plain)), 1e-9);
}

TEST_F(ModelViewTest, ForwardHookChangesLogits) {
  const auto view = attach(model_, HookMode::forward_hook);
  EXPECT_EQ(view.modified_convs(), list_downsampling_convs(model_).eligible);
  EXPECT_GT(max_abs_diff(view.logits(x_), predict_logits(model_, x_)), 1e-9);
  EXPECT_TRUE(view.logits(x_).all_finite());
}

TEST_F(ModelViewTest, SurrogateModeNeedsEveryPath) {
  EXPECT_THROW(attach(model_, HookMode::surrogate), ConfigError);
  auto partial = std::make_shared<SurrogateMap<double>>(*surrogates_);
  partial->erase(partial->begin());
  EXPECT_THROW(attach(model_, HookMode::surrogate, RollSet{}, std::shared_ptr<const SurrogateMap<double>>(partial)),
               ConfigError);
  const auto view = attach(model_, HookMode::surrogate, RollSet{}, surrogates_);
  EXPECT_EQ(view.modified_convs(), list_downsampling_convs(model_).eligible);
  EXPECT_TRUE(view.logits(x_).all_finite());
}

TEST_F(ModelViewTest, StemIsNeverModified) {
  for (HookMode mode : {HookMode::backward_hook, HookMode::forward_hook, HookMode::surrogate}) {
    const auto view = attach(model_, mode, RollSet{}, surrogates_);
    const auto& mods = view.modified_convs();
    EXPECT_EQ(std::find(mods.begin(), mods.end(), "stem"), mods.end());
  }
}

}  // namespace
}  // namespace smoothsal
