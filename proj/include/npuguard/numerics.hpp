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
 * @file numerics.hpp
 * @brief Bit-exact data words, bit flips and protection masks.
 *
 * Every value that moves through the simulated NPU is a Word: a raw bit
 * pattern plus the type it is interpreted as. Faults act on the raw bits,
 * arithmetic acts on the decoded value. Int32 is not an input type; it is
 * the accumulator representation of Int8 MACs.
 */

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace npuguard {

enum class DType : std::uint8_t { Int8, Fp32, Bf16, Int32 };

/// Bits of the raw layout (8 / 32 / 16 / 32).
unsigned bit_width(DType t);
/// Type that MAC results of `t` accumulate into (Int8 -> Int32, floats -> Fp32).
DType accumulator_dtype(DType t);
unsigned accumulator_width(DType t);
bool is_float(DType t);

std::string_view to_string(DType t);
/// Accepts "int8", "fp32", "bf16", "int32" (case-insensitive).
DType parse_dtype(std::string_view name);

/// All ones over the low `width` bits.
constexpr std::uint32_t low_bits(unsigned width) {
  return width >= 32 ? 0xFFFFFFFFu : ((1u << width) - 1u);
}

struct Word {
  std::uint32_t bits = 0;
  DType dtype = DType::Int8;

  /// Masks `raw` down to the width of `t`.
  static Word from_bits(std::uint32_t raw, DType t) {
    return Word{raw & low_bits(bit_width(t)), t};
  }

  friend bool operator==(const Word&, const Word&) = default;
};

/// Bit-exact layout of `value`; integers must be in range and integral,
/// floats finite and in range after round-to-nearest-even.
/// Throws std::range_error otherwise.
Word encode_word(double value, DType t);
double decode_word(Word w);

/// Returns `w` with bit `position` inverted. Throws std::out_of_range.
Word flip_bit(Word w, unsigned position);

/// Round a binary32 value to the nearest bfloat16 (ties to even) and widen
/// back. NaN payloads are kept quiet.
float round_to_bf16(float v);
std::uint16_t bf16_bits(float v);
float bf16_to_float(std::uint16_t bits);

// -- accumulator arithmetic ------------------------------------------------
// Int32 accumulation wraps modulo 2^32; float accumulation is binary32.

/// `acc + a * b`, operands of the input type, result of accumulator type.
Word mac(Word acc, Word a, Word b);
Word acc_add(Word x, Word y);
Word acc_sub(Word x, Word y);
/// Widens an input word to its accumulator type.
Word widen(Word w);
Word zero_word(DType t);

// -- protection masks ------------------------------------------------------

struct BitMask {
  std::uint32_t bits = 0;
  DType dtype = DType::Int8;

  bool contains(unsigned position) const { return (bits >> position) & 1u; }
  unsigned count() const;
  std::uint32_t apply(std::uint32_t raw) const { return raw & bits; }
  bool subset_of(const BitMask& other) const { return (bits & ~other.bits) == 0; }

  friend bool operator==(const BitMask&, const BitMask&) = default;
};

enum class MaskPolicyKind { Full, TopSensitive, Custom };

struct MaskPolicy {
  MaskPolicyKind kind = MaskPolicyKind::TopSensitive;
  std::uint32_t custom = 0;  // only read for Custom

  static MaskPolicy full() { return {MaskPolicyKind::Full, 0}; }
  static MaskPolicy top_sensitive() { return {MaskPolicyKind::TopSensitive, 0}; }
  static MaskPolicy custom_mask(std::uint32_t m) { return {MaskPolicyKind::Custom, m}; }
};

/// Full covers every bit. TopSensitive covers the sign and high exponent bits
/// of floats (top 9 of Fp32, top 4 of Bf16) and every bit of integers.
/// Throws std::invalid_argument if a custom mask exceeds the type width.
BitMask protection_mask(DType t, MaskPolicy policy);

/// Bit-position classes used by the sensitivity sweep.
enum class BitClass { Sign, ExponentHigh, SignExponent, Mantissa, All };

std::string_view to_string(BitClass c);
BitClass parse_bit_class(std::string_view name);
/// Sign = MSB; ExponentHigh = the rest of the TopSensitive mask; Mantissa =
/// everything below it. Integer types have no mantissa (empty mask).
BitMask bit_class_mask(DType t, BitClass c);

}  // namespace npuguard
