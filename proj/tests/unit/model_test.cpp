// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smoothsal/checkpoint.hpp"
#include "smoothsal/errors.hpp"
#include "smoothsal/model.hpp"
#include "smoothsal/train.hpp"
#include "test_support.hpp"

namespace smoothsal {
namespace {

using testing::random_tensor;

MiniResNetConfig small_config() {
  MiniResNetConfig cfg;
  cfg.image_size = 16;
  cfg.widths = {4, 8};
  cfg.blocks_per_stage = 1;
  cfg.classes = 3;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(MiniResNet, DefaultHasFiveDownsamplingConvs) {
  const auto m = build_mini_resnet<float>(MiniResNetConfig{}, 1);
  const auto convs = list_downsampling_convs(m);
  ASSERT_EQ(convs.all.size(), 5u);
  EXPECT_EQ(convs.all.front(), "stem");
  ASSERT_EQ(convs.eligible.size(), 4u);
  EXPECT_EQ(convs.eligible.front(), "stage1.block1.conv1");
  EXPECT_EQ(m.resolve("stage1.out"), "stage1.block2.out");
  EXPECT_EQ(m.layer_shape("stage1.out"), (Shape{16, 16, 16}));
  EXPECT_EQ(m.layer_shape("stage4.out"), (Shape{128, 2, 2}));
  EXPECT_EQ(eligible_hidden_stages(m), (std::vector<std::string>{"stage1.out", "stage2.out", "stage3.out"}));
  EXPECT_EQ(m.last_spatial_layer(), "stage4.block2.out");
  EXPECT_EQ(m.head(), HeadKind::softmax);
}

TEST(MiniResNet, SingleClassUsesSigmoidHead) {
  MiniResNetConfig cfg = small_config();
  cfg.classes = 1;
  const auto m = build_mini_resnet<double>(cfg, 2);
  EXPECT_EQ(m.head(), HeadKind::sigmoid);
  const auto logits = predict_logits(m, Tensor<double>({2, 3, 16, 16}));
  EXPECT_EQ(logits.shape(), (Shape{2, 1}));
  const auto p = probabilities(m.head(), Tensor<double>::from({1, 1}, {0.0}));
  EXPECT_DOUBLE_EQ(p[0], 0.5);
}

TEST(MiniResNet, ZeroInputGivesFiniteLogits) {
  const auto m = build_mini_resnet<float>(MiniResNetConfig{}, 3);
  const auto logits = predict_logits(m, Tensor<float>({2, 3, 64, 64}));
  EXPECT_EQ(logits.shape(), (Shape{2, 4}));
  EXPECT_TRUE(logits.all_finite());
}

TEST(MiniResNet, ForwardIsDeterministic) {
  const auto m = build_mini_resnet<float>(small_config(), 4);
  Rng rng(4);
  const auto x = random_tensor(rng, {3, 3, 16, 16}).cast<float>();
  EXPECT_EQ(predict_logits(m, x), predict_logits(m, x));
  EXPECT_EQ(predict_logits(build_mini_resnet<float>(small_config(), 4), x), predict_logits(m, x));
}

TEST(MiniResNet, RejectsBadConfigs) {
  MiniResNetConfig cfg;
  cfg.image_size = 60;
  EXPECT_THROW(build_mini_resnet<float>(cfg, 0), ConfigError);
  cfg = MiniResNetConfig{};
  cfg.input_channels = 2;
  EXPECT_THROW(build_mini_resnet<float>(cfg, 0), ConfigError);
  cfg = MiniResNetConfig{};
  cfg.classes = 0;
  EXPECT_THROW(build_mini_resnet<float>(cfg, 0), ConfigError);
  cfg = MiniResNetConfig{};
  cfg.widths.clear();
  EXPECT_THROW(build_mini_resnet<float>(cfg, 0), ConfigError);
}

TEST(MiniResNet, UnknownLayerIsUsageError) {
  const auto m = build_mini_resnet<float>(small_config(), 0);
  EXPECT_THROW(m.index_of("nope"), UsageError);
}

TEST(DisplayLayerName, StageBlockNames) {
  EXPECT_EQ(display_layer_name("stage2.block1.out"), "2_1");
  EXPECT_EQ(display_layer_name("stage3.block2.out"), "3_2");
  EXPECT_EQ(display_layer_name("input"), "input");
  EXPECT_EQ(display_layer_name("stage2.block1.conv1"), "stage2.block1.conv1");
}

TEST(RandomizeFromEnd, ChangesOnlyTheCutAndLaterLayers) {
  const auto m = build_mini_resnet<double>(small_config(), 5);
  const auto layers = parameterized_layers(m);
  ASSERT_GT(layers.size(), 3u);
  std::size_t previous_changed = 0;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    const auto r = randomize_from_end(m, *it, 99);
    const std::size_t cut = m.index_of(*it);
    std::size_t changed = 0;
    for (const auto& l : m.layers) {
      for (const auto& p : l.param_names()) {
        const bool same = r.param(l.id, p) == m.param(l.id, p);
        if (m.index_of(l.id) < cut) {
          EXPECT_TRUE(same) << l.id << "." << p;
        } else if (!same) {
          ++changed;
        }
      }
    }
    EXPECT_GE(changed, previous_changed);
    previous_changed = changed;
  }
  EXPECT_THROW(randomize_from_end(m, "stem.relu", 0), UsageError);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  testing::ScratchDir dir("ckpt");
  auto m = build_mini_resnet<float>(small_config(), 6);
  m.metadata["note"] = "x";
  save_checkpoint(m, dir.path() / "a");
  const auto loaded = load_checkpoint<float>(dir.path() / "a");
  EXPECT_EQ(loaded.params, m.params);
  EXPECT_EQ(loaded.aliases, m.aliases);
  EXPECT_EQ(loaded.classes, m.classes);
  EXPECT_EQ(loaded.metadata, m.metadata);
  ASSERT_EQ(loaded.layers.size(), m.layers.size());
  Rng rng(6);
  const auto x = random_tensor(rng, {2, 3, 16, 16}).cast<float>();
  EXPECT_EQ(predict_logits(loaded, x), predict_logits(m, x));

  save_checkpoint(loaded, dir.path() / "b");
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path() / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir.path() / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(dir.path() / "b" / rel)) << rel;
  }
}

TEST(Checkpoint, CorruptOrMissingBlobIsFormatError) {
  testing::ScratchDir dir("ckpt_bad");
  const auto m = build_mini_resnet<float>(small_config(), 7);
  save_checkpoint(m, dir.path());
  const auto blob = dir.path() / "tensors" / "stem.weight.stns";
  ASSERT_TRUE(std::filesystem::exists(blob));
  std::string bytes = slurp(blob);
  std::ofstream(blob, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(load_checkpoint<float>(dir.path()), FormatError);
  std::filesystem::remove(blob);
  EXPECT_THROW(load_checkpoint<float>(dir.path()), FormatError);
  EXPECT_THROW(load_checkpoint<float>(dir.path() / "absent"), FormatError);
}

LabeledImages<double> toy_data(std::int64_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledImages<double> d{random_tensor(rng, {n, 3, 16, 16}), {}};
  for (std::int64_t i = 0; i < n; ++i) d.labels.push_back(i % 3);
  return d;
}

TEST(Training, IsDeterministicForASeed) {
  const auto data = toy_data(12, 1);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 4;
  opt.seed = 11;
  auto a = build_mini_resnet<double>(small_config(), 1);
  auto b = build_mini_resnet<double>(small_config(), 1);
  const auto la = train(a, data, opt);
  const auto lb = train(b, data, opt);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(la.epochs.size(), 2u);
  EXPECT_EQ(la.epochs[1].loss, lb.epochs[1].loss);
  EXPECT_EQ(la.steps, 6);
}

TEST(Training, MemorizesOneSample) {
  const auto data = toy_data(1, 2);
  TrainOptions opt;
  opt.epochs = 200;
  opt.batch_size = 1;
  opt.adam.lr = 1e-2;
  auto m = build_mini_resnet<double>(small_config(), 2);
  const auto log = train(m, data, opt);
  EXPECT_LT(log.epochs.back().loss, 1e-3);
  EXPECT_EQ(log.steps, 200);
  EXPECT_EQ(predict_classes(predict_logits(m, data.images)), data.labels);
}

TEST(Training, FoldsBatchStatisticsIntoAffine) {
  // lr 0 and momentum 1: the folded stem.bn must be gamma / sqrt(var + eps)
  // of the stem conv output over the single training batch.
  const auto data = toy_data(6, 3);
  TrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 6;
  opt.adam.lr = 0.0;
  opt.running_momentum = 1.0;
  auto m = build_mini_resnet<double>(small_config(), 3);
  const auto before = m;
  train(m, data, opt);

  const auto& spec = m.layer("stem");
  const auto y = conv2d<double>(data.images, before.param("stem", "weight"), nullptr,
                                Conv2dGeometry{spec.stride, spec.padding});
  const std::int64_t c = y.dim(1), hw = y.dim(2) * y.dim(3), n = y.dim(0);
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mean = 0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < hw; ++p) mean += y[(i * c + ch) * hw + p];
    mean /= static_cast<double>(n * hw);
    double var = 0;
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < hw; ++p) var += std::pow(y[(i * c + ch) * hw + p] - mean, 2);
    var /= static_cast<double>(n * hw - 1);
    const double gamma = before.param("stem.bn", "scale")[ch];
    const double beta = before.param("stem.bn", "shift")[ch];
    const double folded = gamma / std::sqrt(var + kBatchNormEpsilon);
    EXPECT_NEAR(m.param("stem.bn", "scale")[ch], folded, 1e-10);
    EXPECT_NEAR(m.param("stem.bn", "shift")[ch], beta - mean * folded, 1e-10);
  }
  EXPECT_EQ(m.param("stem", "weight"), before.param("stem", "weight"));
}

TEST(Training, PredictClassesTiesToLowestIndex) {
  EXPECT_EQ(predict_classes(Tensor<double>::from({2, 3}, {1, 1, 0, 0, 2, 2})),
            (std::vector<std::int64_t>{0, 1}));
  EXPECT_EQ(predict_classes(Tensor<double>::from({2, 1}, {0.5, -0.5})), (std::vector<std::int64_t>{1, 0}));
}

}  // namespace
}  // namespace smoothsal
