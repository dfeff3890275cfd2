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

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "npuguard/nonlinear_guard.hpp"

using namespace npuguard;

namespace {

std::vector<Word> fp32(std::initializer_list<double> v) {
  std::vector<Word> out;
  for (double x : v) out.push_back(encode_word(x, DType::Fp32));
  return out;
}

std::vector<Word> i8(std::initializer_list<double> v) {
  std::vector<Word> out;
  for (double x : v) out.push_back(encode_word(x, DType::Int8));
  return out;
}

}  // namespace

TEST_SUITE("nonlinear_guard") {
  TEST_CASE("layernorm invariant") {
    const auto x = fp32({1, 2, 3});
    const auto r = layernorm_guarded(x, {}, {}, 1e-5);
    CHECK(r.passed());
    // Oracle: (x - mean) / sqrt(var + eps) with the population variance.
    const double sd = std::sqrt(2.0 / 3.0 + 1e-5);
    CHECK(decode_word(r.output[0]) == doctest::Approx(-1.0 / sd).epsilon(1e-6));
    CHECK(decode_word(r.output[2]) == doctest::Approx(1.0 / sd).epsilon(1e-6));

    const auto c = layernorm_guarded(fp32({5, 5, 5, 5}), {}, {}, 1e-5);
    CHECK(c.passed());
    for (const auto& w : c.output) CHECK(decode_word(w) == 0.0);

    const NonlinearFlip sign{0, 0, 31};
    const auto f = layernorm_guarded(x, {}, {}, 1e-5, std::span(&sign, 1));
    CHECK_FALSE(f.passed());
    CHECK(std::abs(f.check.measured) == doctest::Approx(2.0 / sd).epsilon(1e-5));

    CHECK_THROWS_AS(layernorm_guarded(i8({1, 2}), {}, {}, 1e-5), std::invalid_argument);
    CHECK_THROWS_AS(layernorm_guarded(x, {}, {}, 0.0), std::invalid_argument);
  }

  TEST_CASE("softmax invariant") {
    const auto r = softmax_guarded(fp32({0, 0}));
    CHECK(r.passed());
    CHECK(decode_word(r.output[0]) == 0.5);
    CHECK(decode_word(r.output[1]) == 0.5);

    const auto big = softmax_guarded(fp32({1000, 0}));
    CHECK(big.passed());
    CHECK(decode_word(big.output[0]) == doctest::Approx(1.0));
    CHECK(std::isfinite(decode_word(big.output[1])));

    // Exponent flip on the larger output at least doubles or halves it.
    const auto x = fp32({0.5, 1.5, -0.2, 0.1});
    const NonlinearFlip e{0, 1, 23};
    const auto f = softmax_guarded(x, std::span(&e, 1));
    CHECK_FALSE(f.passed());
    const auto clean = softmax_guarded(x);
    CHECK(std::abs(f.check.measured - 1.0) >= 0.5 * decode_word(clean.output[1]) - 1e-6);

    auto nan_in = fp32({0, 1});
    nan_in[0] = Word{0x7FC00000u, DType::Fp32};
    const auto n = softmax_guarded(nan_in);
    CHECK_FALSE(n.passed());
  }

  TEST_CASE("redundant evaluation") {
    const RedundantOp relu{RedundantOpKind::ReLU, 2};
    const auto r = redundant_apply(relu, i8({-1, 2}), 3);
    CHECK(r.passed());
    CHECK(r.output == i8({0, 2}));
    CHECK(r.votes.empty());

    const NonlinearFlip one{1, 1, 3};
    const auto t = redundant_apply(relu, i8({-1, 2}), 3, std::span(&one, 1));
    CHECK(t.passed());
    CHECK(t.output == i8({0, 2}));
    REQUIRE(t.votes.size() == 1);
    CHECK(t.votes[0].agreeing == 2);
    CHECK(t.votes[0].copies == 3);

    const auto d = redundant_apply(relu, i8({-1, 2}), 2, std::span(&one, 1));
    CHECK_FALSE(d.passed());

    CHECK_THROWS_AS(redundant_apply(relu, i8({1}), 4), std::invalid_argument);
  }

  TEST_CASE("operator oracles") {
    const RedundantOp maxp{RedundantOpKind::MaxPool, 2};
    CHECK(apply_op(maxp, i8({1, 5, -3, -7})) == i8({5, -3}));
    const RedundantOp avg{RedundantOpKind::AvgPool, 2};
    CHECK(apply_op(avg, i8({1, 2, 3, 4})) == i8({2, 4}));  // 1.5 -> 2, 3.5 -> 4
    CHECK(apply_op(avg, fp32({1, 2})) == fp32({1.5}));
    const RedundantOp gelu{RedundantOpKind::GELU, 2};
    const auto g = apply_op(gelu, fp32({0.0, 1.0}));
    CHECK(decode_word(g[0]) == 0.0);
    const double k = std::sqrt(2.0 / 3.14159265358979323846);
    CHECK(decode_word(g[1]) == doctest::Approx(0.5 * (1.0 + std::tanh(k * 1.044715))).epsilon(1e-6));
    CHECK_THROWS_AS(apply_op(maxp, i8({1, 2, 3})), std::invalid_argument);
  }
}
