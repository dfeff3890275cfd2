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
 * @file nonlinear_guard.hpp
 * @brief Guarded nonlinear units.
 *
 * LayerNorm and Softmax are checked through invariants of their output: the
 * mean-centred, variance-normalised activations sum to zero and a softmax
 * row sums to one. Both units compute in binary32 and run the check on those
 * binary32 values; bf16 outputs are rounded afterwards. Elementwise and
 * pooling operators have no cheap invariant and run as 2 or 3 replicas.
 */

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "npuguard/numerics.hpp"

namespace npuguard {

/// A bit flip on a unit output. `bit` is in the output type's layout; for
/// bf16 it lands on the matching upper bit of the binary32 value.
struct NonlinearFlip {
  unsigned replica = 0;
  std::size_t index = 0;
  unsigned bit = 0;
};

enum class CheckStatus { Pass, Fail };

struct InvariantCheck {
  CheckStatus status = CheckStatus::Pass;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
};

struct VoteRecord {
  std::size_t index = 0;
  unsigned agreeing = 0;  // replicas that produced the chosen value
  unsigned copies = 0;
};

struct GuardedResult {
  std::vector<Word> output;
  InvariantCheck check;
  /// Elements where the replicas did not agree unanimously.
  std::vector<VoteRecord> votes;

  bool passed() const { return check.status == CheckStatus::Pass; }
};

struct NonlinearTolerance {
  double layernorm_scale = 1.0 / 65536.0;      // tau_ln = n * scale * max|normalised|
  double softmax_fp32 = 1.0 / (1 << 20);
  double softmax_bf16 = 1.0 / (1 << 12);
};

/// Throws std::invalid_argument for a non-float type, an empty input,
/// epsilon <= 0, or gamma/beta sizes other than 0 or |x|.
GuardedResult layernorm_guarded(std::span<const Word> x, std::span<const float> gamma, std::span<const float> beta,
                                double epsilon, std::span<const NonlinearFlip> faults = {},
                                const NonlinearTolerance& tol = {});

/// Max-subtracted softmax. Throws std::invalid_argument for a non-float type
/// or an empty input. NaN inputs give a Fail with a NaN measurement.
GuardedResult softmax_guarded(std::span<const Word> x, std::span<const NonlinearFlip> faults = {},
                              const NonlinearTolerance& tol = {});

enum class RedundantOpKind { ReLU, GELU, MaxPool, AvgPool };
std::string to_string(RedundantOpKind k);

struct RedundantOp {
  RedundantOpKind kind = RedundantOpKind::ReLU;
  std::size_t pool_window = 2;  // non-overlapping 1-D windows
};

/// Evaluates `op` on `copies` replicas, applies the replica-local flips and
/// votes. Three copies correct any element where two agree; two copies only
/// detect. Integer inputs are rounded half-to-even and saturated for GELU and
/// AvgPool. Throws std::invalid_argument for copies outside {1,2,3}, an empty
/// input, or a pool window that does not divide |x|.
GuardedResult redundant_apply(const RedundantOp& op, std::span<const Word> x, unsigned copies,
                              std::span<const NonlinearFlip> faults = {});

/// Plain evaluation of the operator, used as an oracle.
std::vector<Word> apply_op(const RedundantOp& op, std::span<const Word> x);

}  // namespace npuguard
