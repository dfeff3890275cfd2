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

#include "npuguard/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace npuguard {

unsigned bit_width(DType t) {
  switch (t) {
    case DType::Int8: return 8;
    case DType::Fp32: return 32;
    case DType::Bf16: return 16;
    case DType::Int32: return 32;
  }
  return 0;
}

DType accumulator_dtype(DType t) {
  switch (t) {
    case DType::Int8:
    case DType::Int32: return DType::Int32;
    case DType::Fp32:
    case DType::Bf16: return DType::Fp32;
  }
  return DType::Int32;
}

unsigned accumulator_width(DType t) { return bit_width(accumulator_dtype(t)); }

bool is_float(DType t) { return t == DType::Fp32 || t == DType::Bf16; }

std::string_view to_string(DType t) {
  switch (t) {
    case DType::Int8: return "int8";
    case DType::Fp32: return "fp32";
    case DType::Bf16: return "bf16";
    case DType::Int32: return "int32";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }
float bits_float(std::uint32_t u) { return std::bit_cast<float>(u); }

// Double -> binary32 with round-to-odd, so that a following binary32 ->
// bfloat16 nearest-even rounding equals a single direct rounding.
float to_float_round_odd(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) == v || std::isinf(f)) return f;
  if (std::fabs(static_cast<double>(f)) > std::fabs(v)) f = std::nextafter(f, 0.0f);
  return bits_float(float_bits(f) | 1u);
}

}  // namespace

DType parse_dtype(std::string_view name) {
  const auto n = lower(name);
  if (n == "int8") return DType::Int8;
  if (n == "fp32") return DType::Fp32;
  if (n == "bf16") return DType::Bf16;
  if (n == "int32") return DType::Int32;
  throw std::invalid_argument("unknown dtype: " + std::string(name));
}

float round_to_bf16(float v) { return bf16_to_float(bf16_bits(v)); }

std::uint16_t bf16_bits(float v) {
  std::uint32_t u = float_bits(v);
  if (std::isnan(v)) return static_cast<std::uint16_t>((u >> 16) | 0x0040u);
  u += 0x7FFFu + ((u >> 16) & 1u);
  return static_cast<std::uint16_t>(u >> 16);
}

float bf16_to_float(std::uint16_t bits) {
  return bits_float(static_cast<std::uint32_t>(bits) << 16);
}

Word encode_word(double value, DType t) {
  switch (t) {
    case DType::Int8:
    case DType::Int32: {
      const double lo = t == DType::Int8 ? -128.0 : -2147483648.0;
      const double hi = t == DType::Int8 ? 127.0 : 2147483647.0;
      if (!(value >= lo && value <= hi) || std::trunc(value) != value)
        throw std::range_error("value not representable as " + std::string(to_string(t)));
      const auto v = static_cast<std::int32_t>(value);
      return Word::from_bits(static_cast<std::uint32_t>(v), t);
    }
    case DType::Fp32: {
      const float f = static_cast<float>(value);
      if (!std::isfinite(value) || !std::isfinite(f))
        throw std::range_error("value not representable as fp32");
      return Word{float_bits(f), t};
    }
    case DType::Bf16: {
      if (!std::isfinite(value)) throw std::range_error("value not representable as bf16");
      const std::uint16_t b = bf16_bits(to_float_round_odd(value));
      if (!std::isfinite(bf16_to_float(b))) throw std::range_error("value not representable as bf16");
      return Word{b, t};
    }
  }
  throw std::invalid_argument("bad dtype");
}

double decode_word(Word w) {
  switch (w.dtype) {
    case DType::Int8: return static_cast<std::int8_t>(static_cast<std::uint8_t>(w.bits));
    case DType::Int32: return static_cast<std::int32_t>(w.bits);
    case DType::Fp32: return bits_float(w.bits);
    case DType::Bf16: return bf16_to_float(static_cast<std::uint16_t>(w.bits));
  }
  return 0.0;
}

Word flip_bit(Word w, unsigned position) {
  if (position >= bit_width(w.dtype))
    throw std::out_of_range("bit position " + std::to_string(position) + " outside " +
                            std::string(to_string(w.dtype)));
  w.bits ^= (1u << position);
  return w;
}

namespace {

float as_float(Word w) {
  return w.dtype == DType::Bf16 ? bf16_to_float(static_cast<std::uint16_t>(w.bits))
                                : bits_float(w.bits);
}

std::int32_t as_int(Word w) {
  return w.dtype == DType::Int8 ? static_cast<std::int8_t>(static_cast<std::uint8_t>(w.bits))
                                : static_cast<std::int32_t>(w.bits);
}

}  // namespace

Word widen(Word w) {
  switch (w.dtype) {
    case DType::Int8: return Word{static_cast<std::uint32_t>(as_int(w)), DType::Int32};
    case DType::Bf16: return Word{float_bits(as_float(w)), DType::Fp32};
    default: return w;
  }
}

Word zero_word(DType t) { return Word{0, t}; }

Word mac(Word acc, Word a, Word b) {
  if (is_float(a.dtype)) {
    const float product = as_float(a) * as_float(b);
    return Word{float_bits(bits_float(acc.bits) + product), DType::Fp32};
  }
  const auto product = static_cast<std::uint32_t>(static_cast<std::int64_t>(as_int(a)) * as_int(b));
  return Word{acc.bits + product, DType::Int32};
}

Word acc_add(Word x, Word y) {
  if (x.dtype == DType::Fp32) return Word{float_bits(bits_float(x.bits) + bits_float(y.bits)), DType::Fp32};
  return Word{x.bits + y.bits, DType::Int32};
}

Word acc_sub(Word x, Word y) {
  if (x.dtype == DType::Fp32) return Word{float_bits(bits_float(x.bits) - bits_float(y.bits)), DType::Fp32};
  return Word{x.bits - y.bits, DType::Int32};
}

unsigned BitMask::count() const { return static_cast<unsigned>(std::popcount(bits)); }

BitMask protection_mask(DType t, MaskPolicy policy) {
  const std::uint32_t all = low_bits(bit_width(t));
  switch (policy.kind) {
    case MaskPolicyKind::Full: return {all, t};
    case MaskPolicyKind::TopSensitive:
      switch (t) {
        case DType::Fp32: return {0xFF800000u, t};  // bits 23..31
        case DType::Bf16: return {0xF000u, t};      // bits 12..15
        default: return {all, t};
      }
    case MaskPolicyKind::Custom:
      if (policy.custom & ~all)
        throw std::invalid_argument("custom mask exceeds width of " + std::string(to_string(t)));
      return {policy.custom, t};
  }
  return {all, t};
}

std::string_view to_string(BitClass c) {
  switch (c) {
    case BitClass::Sign: return "sign";
    case BitClass::ExponentHigh: return "exponent_high";
    case BitClass::SignExponent: return "sign_exponent";
    case BitClass::Mantissa: return "mantissa";
    case BitClass::All: return "all";
  }
  return "?";
}

BitClass parse_bit_class(std::string_view name) {
  const auto n = lower(name);
  if (n == "sign") return BitClass::Sign;
  if (n == "exponent_high" || n == "exponent") return BitClass::ExponentHigh;
  if (n == "sign_exponent") return BitClass::SignExponent;
  if (n == "mantissa") return BitClass::Mantissa;
  if (n == "all") return BitClass::All;
  throw std::invalid_argument("unknown bit class: " + std::string(name));
}

BitMask bit_class_mask(DType t, BitClass c) {
  const unsigned w = bit_width(t);
  const std::uint32_t all = low_bits(w);
  const std::uint32_t sign = 1u << (w - 1);
  const std::uint32_t top = protection_mask(t, MaskPolicy::top_sensitive()).bits;
  switch (c) {
    case BitClass::Sign: return {sign, t};
    case BitClass::ExponentHigh: return {top & ~sign, t};
    case BitClass::SignExponent: return {top, t};
    case BitClass::Mantissa: return {all & ~top, t};
    case BitClass::All: return {all, t};
  }
  return {all, t};
}

}  // namespace npuguard
