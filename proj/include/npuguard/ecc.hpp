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
 * @file ecc.hpp
 * @brief SEC-DED protection for configuration and instruction registers.
 *
 * Codeword layout (extended Hamming, odd parity):
 *
 *   position 0           global parity over the whole codeword
 *   positions 1,2,4,...  partial parity bits; bit i covers every position
 *                        whose index has bit i set
 *   other positions      data bits in ascending order
 *
 * Bit `p` of Codeword::bits holds codeword position `p`. A data width is
 * encodable when its ceil(log2(a+1)) partial parities can address all of
 * its positions, i.e. 2^r >= a + r + 1. Widths 1..3, 5..7, 12..15 and
 * 27..31 fall short of that and are rejected.
 */

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace npuguard::ecc {

/// Each parity group holds an odd number of ones. Flip to use even parity.
inline constexpr bool kOddParity = true;

/// Check bits spent on `data_width` data bits: ceil(log2(a+1)) + 1.
unsigned check_width(unsigned data_width);
/// Partial parity bits only (check_width - 1).
unsigned partial_parity_count(unsigned data_width);
bool is_encodable(unsigned data_width);
/// Largest encodable width; codewords must fit into 64 bits.
inline constexpr unsigned kMaxDataWidth = 57;

struct Codeword {
  unsigned data_width = 0;
  std::uint64_t bits = 0;

  unsigned width() const { return data_width + check_width(data_width); }
  friend bool operator==(const Codeword&, const Codeword&) = default;
};

enum class DecodeStatus { Clean, Corrected, DoubleError };

struct DecodeResult {
  std::uint64_t data = 0;
  DecodeStatus status = DecodeStatus::Clean;
  /// Codeword position that was repaired; only meaningful when Corrected.
  unsigned position = 0;
};

/// Throws std::invalid_argument for unencodable widths.
Codeword encode(std::uint64_t data, unsigned data_width);
DecodeResult decode(const Codeword& cw);
/// Codeword with position `p` inverted. Throws std::out_of_range.
Codeword flip(Codeword cw, unsigned position);
/// Codeword position of data bit `i`.
unsigned data_position(unsigned data_width, unsigned data_bit);

std::string to_string(DecodeStatus s);

/// Register file whose entries are stored as SEC-DED codewords.
///
/// Reads decode, repair single errors and write the repaired codeword back.
/// Stuck cells model permanent faults: they force their bit on every store
/// and every read, so scrubbing cannot clear them.
class RegisterFile {
 public:
  struct Stats {
    std::uint64_t reads = 0;
    std::uint64_t corrected = 0;
    std::uint64_t double_errors = 0;
  };

  /// Declares (or re-declares) register `id`, zero-initialised.
  void declare(const std::string& id, unsigned data_width);
  bool contains(const std::string& id) const { return regs_.count(id) != 0; }
  unsigned width(const std::string& id) const;

  void write(const std::string& id, std::uint64_t data);
  DecodeResult read(const std::string& id);

  /// Transient upset of the stored codeword.
  void inject_flip(const std::string& id, unsigned position);
  /// Permanent stuck cell at codeword `position`.
  void set_stuck(const std::string& id, unsigned position, bool value);
  void clear_stuck(const std::string& id);

  const Codeword& raw(const std::string& id) const;
  const Stats& stats(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  struct Entry {
    Codeword cw;
    std::uint64_t stuck_mask = 0;
    std::uint64_t stuck_value = 0;
    Stats stats;
  };

  Entry& entry(const std::string& id);
  const Entry& entry(const std::string& id) const;
  static void apply_stuck(Entry& e) {
    e.cw.bits = (e.cw.bits & ~e.stuck_mask) | (e.stuck_value & e.stuck_mask);
  }

  std::map<std::string, Entry> regs_;
};

}  // namespace npuguard::ecc
