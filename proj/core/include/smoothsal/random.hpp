// Copyright 2026 The smoothsal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace smoothsal {

// Every random draw in the library comes from a named substream of one 64-bit
// root seed, e.g. stream_seed(seed, "smoothgrad"). Streams are independent of
// each other, so pinning one does not shift the others.
std::uint64_t stream_seed(std::uint64_t root, std::string_view stream);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(stream_seed(root, stream));
}

}  // namespace smoothsal
