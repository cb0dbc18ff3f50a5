// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "smoothsal/denoise.hpp"
#include "smoothsal/model.hpp"
#include "smoothsal/ops.hpp"
#include "smoothsal/train.hpp"

namespace smoothsal {
namespace {

Tensor<float> noise(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = nd(rng);
  return t;
}

// Args: channels, spatial extent. 3x3 stride-2 padding-1, batch 32.
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = state.range(0);
  const auto s = state.range(1);
  const auto x = noise({32, c, s, s}, 1);
  const auto w = noise({2 * c, c, 3, 3}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d<float>(x, w, nullptr, Conv2dGeometry{2, 1}));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 32})->Args({32, 16})->Args({64, 8});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = state.range(0);
  const auto s = state.range(1);
  const Conv2dGeometry geom{2, 1};
  const auto x = noise({32, c, s, s}, 1);
  const auto w = noise({2 * c, c, 3, 3}, 2);
  const auto g = noise(conv2d<float>(x, w, nullptr, geom).shape(), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward(g, x, w, false, geom));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Conv2dBackward)->Args({16, 32})->Args({32, 16})->Args({64, 8});

void BM_Roll2d(benchmark::State& state) {
  const auto t = noise({32, 16, 32, 32}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(roll2d(t, {1, 1}));
  state.SetBytesProcessed(state.iterations() * t.numel() * static_cast<std::int64_t>(sizeof(float)));
}
BENCHMARK(BM_Roll2d);

void BM_BackwardHook(benchmark::State& state) {
  const auto g = noise({32, 16, 32, 32}, 5);
  const RollSet rolls;
  for (auto _ : state) benchmark::DoNotOptimize(backward_hook(g, rolls));
}
BENCHMARK(BM_BackwardHook);

// One Adam step of the default mini-ResNet on a 64x64 RGB batch.
void BM_TrainStep(benchmark::State& state) {
  const auto n = state.range(0);
  auto model = build_mini_resnet<float>(MiniResNetConfig{}, 1);
  LabeledImages<float> data{noise({n, 3, 64, 64}, 6), std::vector<std::int64_t>(static_cast<std::size_t>(n))};
  for (std::int64_t i = 0; i < n; ++i) data.labels[static_cast<std::size_t>(i)] = i % 4;
  TrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = static_cast<int>(n);
  for (auto _ : state) benchmark::DoNotOptimize(train(model, data, opt));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TrainStep)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace smoothsal

BENCHMARK_MAIN();
