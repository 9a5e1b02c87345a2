// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace gsr {

/// Portable random stream. The engine is mt19937_64 (bit-identical across
/// standard libraries); every distribution below is implemented here rather
/// than through <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

  /// Rebuilds a stream at a recorded position.
  static Rng restore(std::uint64_t seed, std::uint64_t position) {
    Rng rng(seed);
    rng.engine_.discard(position);
    rng.position_ = position;
    return rng;
  }

  std::uint64_t next_u64() {
    ++position_;
    return engine_();
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Derives an independent child seed; advances this stream by one draw.
  std::uint64_t split() { return next_u64() ^ 0x9E3779B97F4A7C15ULL; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t position_ = 0;
};

}  // namespace gsr
