/*
 * Copyright 2026 The npuguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file rng.hpp
 * @brief Counter-based random numbers with independent substreams.
 *
 * Output n of stream (seed, a, b) is the SplitMix64 finaliser applied to
 * key + n * golden_gamma, where key mixes the three identifiers. The value
 * depends only on those four integers, so trials can run in any order on any
 * thread. Distributions are implemented here rather than taken from <random>
 * because the standard ones are not specified bit-for-bit across library
 * versions.
 */

#pragma once

#include <cstdint>
#include <limits>

namespace npuguard {

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0)
      : key_(mix64(mix64(mix64(seed) ^ (stream_a + kGamma)) ^ (stream_b + 2 * kGamma))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (counter_++) * kGamma); }
  std::uint64_t counter() const { return counter_; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [0, n) without modulo bias. Returns 0 for n == 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one value per call).
  double normal();
  /// Number of successes in n Bernoulli(p) draws, sampled by skipping over
  /// geometric gaps; exact for any p in [0, 1].
  std::uint64_t binomial(std::uint64_t n, double p);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace npuguard
