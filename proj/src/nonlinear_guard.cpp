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

#include "npuguard/nonlinear_guard.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace npuguard {

std::string to_string(RedundantOpKind k) {
  switch (k) {
    case RedundantOpKind::ReLU: return "relu";
    case RedundantOpKind::GELU: return "gelu";
    case RedundantOpKind::MaxPool: return "maxpool";
    case RedundantOpKind::AvgPool: return "avgpool";
  }
  return "?";
}

namespace {

DType uniform_float_type(std::span<const Word> x, const char* who) {
  if (x.empty()) throw std::invalid_argument(std::string(who) + ": empty input");
  const DType t = x.front().dtype;
  if (!is_float(t)) throw std::invalid_argument(std::string(who) + ": needs a floating-point input");
  for (const auto& w : x)
    if (w.dtype != t) throw std::invalid_argument(std::string(who) + ": mixed input types");
  return t;
}

float as_float(Word w) { return static_cast<float>(decode_word(w)); }

/// Flips the binary32 bit that corresponds to `bit` of an output of type `t`.
float flip_unit_value(float v, DType t, unsigned bit) {
  const unsigned width = bit_width(t);
  if (bit >= width) throw std::out_of_range("nonlinear flip bit out of range");
  const unsigned shift = t == DType::Bf16 ? 16 : 0;
  return std::bit_cast<float>(std::bit_cast<std::uint32_t>(v) ^ (1u << (bit + shift)));
}

Word to_output(float v, DType t) {
  if (t == DType::Bf16) return Word{bf16_bits(v), DType::Bf16};
  return Word{std::bit_cast<std::uint32_t>(v), DType::Fp32};
}

void apply_unit_flips(std::vector<float>& values, DType t, std::span<const NonlinearFlip> faults) {
  for (const auto& f : faults) {
    if (f.index >= values.size()) throw std::out_of_range("nonlinear flip index out of range");
    values[f.index] = flip_unit_value(values[f.index], t, f.bit);
  }
}

}  // namespace

GuardedResult layernorm_guarded(std::span<const Word> x, std::span<const float> gamma, std::span<const float> beta,
                                double epsilon, std::span<const NonlinearFlip> faults, const NonlinearTolerance& tol) {
  const DType t = uniform_float_type(x, "layernorm");
  const std::size_t n = x.size();
  if (!(epsilon > 0.0)) throw std::invalid_argument("layernorm: epsilon must be positive");
  if ((!gamma.empty() && gamma.size() != n) || (!beta.empty() && beta.size() != n))
    throw std::invalid_argument("layernorm: gamma/beta length must match the input");

  double mean = 0.0;
  for (const auto& w : x) mean += decode_word(w);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& w : x) {
    const double c = decode_word(w) - mean;
    var += c * c;
  }
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + epsilon);

  std::vector<float> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = static_cast<float>((decode_word(x[i]) - mean) * inv_std);
  apply_unit_flips(z, t, faults);

  double sum = 0.0;
  double largest = 0.0;
  for (const float v : z) {
    sum += v;
    largest = std::max(largest, static_cast<double>(std::abs(v)));
  }
  GuardedResult out;
  out.check.measured = sum;
  out.check.expected = 0.0;
  out.check.tolerance = static_cast<double>(n) * tol.layernorm_scale * largest;
  const bool ok = std::isfinite(sum) && std::abs(sum) <= out.check.tolerance;
  out.check.status = ok ? CheckStatus::Pass : CheckStatus::Fail;

  out.output.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float g = gamma.empty() ? 1.0f : gamma[i];
    const float b = beta.empty() ? 0.0f : beta[i];
    out.output.push_back(to_output(g * z[i] + b, t));
  }
  return out;
}

GuardedResult softmax_guarded(std::span<const Word> x, std::span<const NonlinearFlip> faults,
                              const NonlinearTolerance& tol) {
  const DType t = uniform_float_type(x, "softmax");
  const std::size_t n = x.size();

  double top = -std::numeric_limits<double>::infinity();
  bool has_nan = false;
  for (const auto& w : x) {
    const double v = decode_word(w);
    if (std::isnan(v)) has_nan = true;
    top = std::max(top, v);
  }
  std::vector<double> e(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = std::exp(decode_word(x[i]) - top);
    total += e[i];
  }
  std::vector<float> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = has_nan ? std::numeric_limits<float>::quiet_NaN() : static_cast<float>(e[i] / total);
  apply_unit_flips(y, t, faults);

  double sum = 0.0;
  for (const float v : y) sum += v;
  GuardedResult out;
  out.check.measured = sum;
  out.check.expected = 1.0;
  out.check.tolerance = t == DType::Bf16 ? tol.softmax_bf16 : tol.softmax_fp32;
  const bool ok = std::isfinite(sum) && std::abs(sum - 1.0) <= out.check.tolerance;
  out.check.status = ok ? CheckStatus::Pass : CheckStatus::Fail;

  out.output.reserve(n);
  for (const float v : y) out.output.push_back(to_output(v, t));
  return out;
}

namespace {

Word from_real(double v, DType t) {
  if (is_float(t)) return to_output(static_cast<float>(v), t);
  // Integer types: round half to even, then saturate.
  const double lo = t == DType::Int8 ? -128.0 : -2147483648.0;
  const double hi = t == DType::Int8 ? 127.0 : 2147483647.0;
  const double r = std::clamp(std::nearbyint(v), lo, hi);
  return encode_word(r, t);
}

double gelu_tanh(double v) {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v)));
}

}  // namespace

std::vector<Word> apply_op(const RedundantOp& op, std::span<const Word> x) {
  if (x.empty()) throw std::invalid_argument("redundant op: empty input");
  const DType t = x.front().dtype;
  std::vector<Word> out;
  switch (op.kind) {
    case RedundantOpKind::ReLU:
      for (const auto& w : x) out.push_back(decode_word(w) > 0.0 ? w : zero_word(t));
      return out;
    case RedundantOpKind::GELU:
      for (const auto& w : x) {
        const double v = is_float(t) ? static_cast<double>(as_float(w)) : decode_word(w);
        out.push_back(from_real(gelu_tanh(v), t));
      }
      return out;
    case RedundantOpKind::MaxPool:
    case RedundantOpKind::AvgPool: {
      const std::size_t w = op.pool_window;
      if (w == 0 || x.size() % w != 0) throw std::invalid_argument("pool window must divide the input length");
      for (std::size_t base = 0; base < x.size(); base += w) {
        if (op.kind == RedundantOpKind::MaxPool) {
          std::size_t best = base;
          for (std::size_t i = base + 1; i < base + w; ++i)
            if (decode_word(x[i]) > decode_word(x[best])) best = i;
          out.push_back(x[best]);
        } else {
          double s = 0.0;
          for (std::size_t i = base; i < base + w; ++i) s += decode_word(x[i]);
          out.push_back(from_real(s / static_cast<double>(w), t));
        }
      }
      return out;
    }
  }
  return out;
}

GuardedResult redundant_apply(const RedundantOp& op, std::span<const Word> x, unsigned copies,
                              std::span<const NonlinearFlip> faults) {
  if (copies < 1 || copies > 3) throw std::invalid_argument("redundant_apply: copies must be 1, 2 or 3");
  std::vector<std::vector<Word>> replicas;
  for (unsigned r = 0; r < copies; ++r) replicas.push_back(apply_op(op, x));
  const std::size_t n = replicas.front().size();
  for (const auto& f : faults) {
    if (f.replica >= copies) continue;  // no such replica to hit
    if (f.index >= n) throw std::out_of_range("nonlinear flip index out of range");
    Word& w = replicas[f.replica][f.index];
    w = flip_bit(w, f.bit);
  }

  GuardedResult out;
  out.output = replicas.front();
  std::size_t unresolved = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (copies == 1) break;
    const Word a = replicas[0][i];
    const Word b = replicas[1][i];
    if (copies == 2) {
      if (!(a == b)) {
        ++unresolved;
        out.votes.push_back({i, 1, 2});
      }
      continue;
    }
    const Word c = replicas[2][i];
    if (a == b && b == c) continue;
    if (a == b || a == c) {
      out.output[i] = a;
      out.votes.push_back({i, 2, 3});
    } else if (b == c) {
      out.output[i] = b;
      out.votes.push_back({i, 2, 3});
    } else {
      ++unresolved;
      out.votes.push_back({i, 1, 3});
    }
  }
  out.check.measured = static_cast<double>(unresolved);
  out.check.expected = 0.0;
  out.check.tolerance = 0.0;
  out.check.status = unresolved == 0 ? CheckStatus::Pass : CheckStatus::Fail;
  return out;
}

}  // namespace npuguard
