// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "smoothsal/errors.hpp"
#include "smoothsal/ops.hpp"
#include "smoothsal/tape.hpp"
#include "smoothsal/tensor.hpp"
#include "smoothsal/tensor_io.hpp"
#include "test_support.hpp"

namespace smoothsal {
namespace {

using testing::random_tensor;

TEST(Tensor, ShapeInvariants) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24);
  EXPECT_EQ(t.dim(-1), 4);
  EXPECT_EQ(t.dim(0), 2);
  EXPECT_THROW(Tensor<float>({2, 0}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), DimensionError);
  EXPECT_THROW(t.dim(3), DimensionError);
  EXPECT_THROW(t.reshaped({5, 5}), DimensionError);
  EXPECT_EQ(t.reshaped({6, 4}).shape(), (Shape{6, 4}));
}

TEST(Tensor, BatchHelpers) {
  Tensor<double> t({3, 2}, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(slice_batch(t, 1, 2), Tensor<double>({2, 2}, std::vector<double>{2, 3, 4, 5}));
  const std::vector<std::int64_t> rows{2, 0};
  EXPECT_EQ(gather_batch(t, rows), Tensor<double>({2, 2}, std::vector<double>{4, 5, 0, 1}));
  const std::vector<Tensor<double>> parts{slice_batch(t, 0, 1), slice_batch(t, 1, 2)};
  EXPECT_EQ(concat_batch<double>(parts), t);
  EXPECT_THROW(slice_batch(t, 2, 2), DimensionError);
  EXPECT_DOUBLE_EQ(sum(t), 15.0);
  EXPECT_DOUBLE_EQ(max_abs(t), 5.0);
}

TEST(Stns, HeaderLayoutIsExact) {
  Tensor<float> t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const std::string bytes = encode_stns(t);
  ASSERT_EQ(bytes.size(), 4u + 3u + 2u * 4u + 6u * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "STNS");
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[4]), 0x01);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[5]), 0x01);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[6]), 2);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[7]), 2);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[11]), 3);
  float first;
  std::memcpy(&first, bytes.data() + 15, 4);
  EXPECT_EQ(first, 1.0f);
  EXPECT_EQ(static_cast<std::uint8_t>(encode_stns(t.cast<double>())[5]), 0x02);
}

TEST(Stns, RoundTripIsBitExact) {
  Rng rng(7);
  for (int rank = 1; rank <= 4; ++rank) {
    Shape s;
    for (int k = 0; k < rank; ++k) s.push_back(1 + k * 2);
    const Tensor<double> d = random_tensor(rng, s, -1e6, 1e6);
    const std::string bytes = encode_stns(d);
    EXPECT_EQ(decode_stns<double>(bytes), d);
    EXPECT_EQ(encode_stns(decode_stns<double>(bytes)), bytes);
    const Tensor<float> f = d.cast<float>();
    EXPECT_EQ(decode_stns<float>(encode_stns(f)), f);
  }
}

TEST(Stns, RejectsCorruptInput) {
  const std::string good = encode_stns(Tensor<float>::ones({2, 2}));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_stns<float>(bad_magic), FormatError);
  std::string bad_version = good;
  bad_version[4] = 0x02;
  EXPECT_THROW(decode_stns<float>(bad_version), FormatError);
  std::string bad_dtype = good;
  bad_dtype[5] = 0x07;
  EXPECT_THROW(decode_stns<float>(bad_dtype), FormatError);
  EXPECT_THROW(decode_stns<float>(good.substr(0, good.size() - 1)), FormatError);
  EXPECT_THROW(decode_stns<float>(good + "x"), FormatError);
  EXPECT_THROW(decode_stns<float>("STN"), FormatError);
}

TEST(Stns, FileRoundTrip) {
  testing::ScratchDir dir("stns");
  Rng rng(3);
  const Tensor<double> t = random_tensor(rng, {2, 3, 4, 5});
  write_stns(dir.path() / "nested" / "t.stns", t);
  EXPECT_EQ(read_stns<double>(dir.path() / "nested" / "t.stns"), t);
  EXPECT_THROW(read_stns<double>(dir.path() / "missing.stns"), FormatError);
}

TEST(Tape, SumGradientIsOnes) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>({2, 3}, 0.5), true);
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(x), Tensor<double>::ones({2, 3}));
}

TEST(Tape, ReluSubgradientAtNegativeAndPositive) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>::from({2}, {-1.0, 2.0}), true);
  tape.backward(sum(relu(x)));
  EXPECT_EQ(tape.grad(x), Tensor<double>::from({2}, {0.0, 1.0}));
}

TEST(Tape, ReluSubgradientAtZeroIsZero) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>::from({1}, {0.0}), true);
  tape.backward(sum(relu(x)));
  EXPECT_EQ(tape.grad(x)[0], 0.0);
}

TEST(Tape, FanOutAccumulates) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>::from({1}, {3.0}), true);
  tape.backward(sum(mul(x, x)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);
}

TEST(Tape, VisitsEachNodeOnceInReverseOrder) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>::ones({2}), true);
  Var<double> a = scale(x, 2.0);
  Var<double> b = add(a, x);
  Var<double> s = sum(mul(a, b));
  tape.backward(s);
  const auto& order = tape.last_backward_order();
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_GT(order[i - 1], order[i]);
  std::vector<int> sorted(order);
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
}

TEST(Tape, RejectsForeignAndNonScalarRoots) {
  Tape<double> a;
  Tape<double> b;
  Var<double> x = a.leaf(Tensor<double>::ones({1}), true);
  EXPECT_THROW(b.backward(x), UsageError);
  Var<double> v = a.leaf(Tensor<double>::ones({2}), true);
  EXPECT_THROW(a.backward(v), UsageError);
}

TEST(Tape, FrozenLeavesHaveNoGradient) {
  Tape<double> tape;
  Var<double> w = tape.leaf(Tensor<double>::ones({2}), false);
  Var<double> x = tape.leaf(Tensor<double>::ones({2}), true);
  tape.backward(sum(mul(w, x)));
  EXPECT_FALSE(tape.has_grad(w));
  EXPECT_TRUE(tape.has_grad(x));
  EXPECT_THROW(tape.grad(w), UsageError);
}

TEST(Tape, WatchExposesIntermediateGradient) {
  Tape<double> tape;
  Var<double> x = tape.leaf(Tensor<double>::from({2}, {1.0, -2.0}));
  Var<double> h = tape.watch(scale(x, 3.0));
  tape.backward(sum(mul(h, h)));
  EXPECT_EQ(tape.grad(h), Tensor<double>::from({2}, {6.0, -12.0}));
}

}  // namespace
}  // namespace smoothsal
