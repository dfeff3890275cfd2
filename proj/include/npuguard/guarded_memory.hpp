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
 * @file guarded_memory.hpp
 * @brief Scratchpad/accumulator model with dual-vector checksums.
 *
 * Every resident block has a row-sum vector and a column-sum vector in the
 * guardpad. The sums are wrapping additions of the raw bit patterns after
 * masking, with the same width as the elements, so no numeric conversion is
 * involved and overflow is harmless.
 *
 * On read the verifier recomputes both vectors. A lone faulty word shifts its
 * row sum and its column sum by the same delta, which the corrector uses to
 * find and repair it. A mismatch on only one axis is attributed to the
 * checksum itself and the checksum is rewritten; data is never touched.
 */

#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "npuguard/matrix.hpp"
#include "npuguard/numerics.hpp"

namespace npuguard {

using Address = std::uint32_t;

struct ChecksumVectors {
  std::vector<std::uint32_t> row_sums;
  std::vector<std::uint32_t> col_sums;
  unsigned width = 0;

  friend bool operator==(const ChecksumVectors&, const ChecksumVectors&) = default;
};

/// Throws std::invalid_argument for an empty block.
ChecksumVectors checksum_generate(const WordMatrix& block, const BitMask& mask);

class AllocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis { Row, Col };

struct TileCoord {
  std::int32_t row = 0;
  std::int32_t col = 0;
  friend bool operator==(const TileCoord&, const TileCoord&) = default;
};

struct CellCorrection {
  std::size_t row = 0;
  std::size_t col = 0;
  std::uint32_t delta = 0;  // added (mod 2^w) into the masked field
};

struct ChecksumRepair {
  Axis axis = Axis::Row;
  std::size_t index = 0;
};

enum class VerifyStatus { Clean, Corrected, ChecksumRepaired, Uncorrectable };
std::string to_string(VerifyStatus s);

struct VerifyOutcome {
  VerifyStatus status = VerifyStatus::Clean;
  std::vector<CellCorrection> corrections;
  std::vector<ChecksumRepair> repairs;
  /// Cycles from read issue to the verdict: rows streamed + adder tree + compare.
  std::uint64_t latency_cycles = 0;
};

/// Cells that have been logged this many times are reported as likely
/// permanent faults.
inline constexpr std::uint64_t kPermanentFaultThreshold = 3;

enum class ErrorKind { Data, Checksum, Tile, Uncorrectable };
std::string to_string(ErrorKind k);

struct ErrorRecord {
  Address address = 0;
  std::int32_t row = -1;          // -1: whole block / not applicable
  std::int32_t col_or_tile = -1;  // column for data, tile column for Tile
  ErrorKind kind = ErrorKind::Data;
  std::uint64_t count = 0;
  std::uint32_t last_delta = 0;

  bool permanent_candidate() const { return count >= kPermanentFaultThreshold; }
};

using ErrorLog = std::vector<ErrorRecord>;

/// CSV with header `address,row,col_or_tile,kind,count,last_delta_hex`.
void write_error_log_csv(std::ostream& os, const ErrorLog& log);

/// Binds resident blocks to their guardpad slots and keeps the error block.
class GuardLinker {
 public:
  struct Entry {
    std::size_t guardpad_offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    TileCoord tile;
  };

  void bind(Address addr, const Entry& e) { entries_[addr] = e; }
  void unbind(Address addr) { entries_.erase(addr); }
  const Entry* find(Address addr) const;
  const std::map<Address, Entry>& entries() const { return entries_; }

  /// Increments the count for (address,row,col,kind) and records the delta.
  void log(Address addr, std::int32_t row, std::int32_t col, ErrorKind kind, std::uint32_t delta);
  ErrorLog error_block() const;
  void clear_errors() { errors_.clear(); }

 private:
  struct Key {
    Address address;
    std::int32_t row;
    std::int32_t col;
    ErrorKind kind;
    auto operator<=>(const Key&) const = default;
  };

  std::map<Address, Entry> entries_;
  std::map<Key, ErrorRecord> errors_;
};

class GuardedMemory {
 public:
  struct ReadResult {
    WordMatrix data;
    ChecksumVectors sums;  // fresh checksums over exactly `data`
    VerifyOutcome outcome;
  };

  /// `capacity_rows` rows of storage; a block occupies one row per matrix row.
  explicit GuardedMemory(std::size_t capacity_rows, MaskPolicy policy = MaskPolicy::top_sensitive());

  /// Stores `block` at `addr` and snapshots its checksums into the guardpad.
  /// Re-writing an address replaces the linker entry but keeps the error log.
  /// Throws AllocationError on capacity overflow or overlap with another block.
  void mvin(Address addr, WordMatrix block, TileCoord tile = {});
  /// Stores `block` with checksums computed upstream (write-back path).
  void mvin_with_checksums(Address addr, WordMatrix block, ChecksumVectors sums, TileCoord tile = {});
  void release(Address addr);

  /// Throws std::out_of_range if nothing is resident at `addr`.
  VerifyOutcome verify_and_correct(Address addr);

  /// Verify/correct, then hand out a sub-block with freshly generated sums.
  ReadResult read(Address addr, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols);
  ReadResult read(Address addr);

  /// Unverified views, used for fault injection and inspection.
  WordMatrix& raw_data(Address addr);
  const WordMatrix& raw_data(Address addr) const;
  std::uint32_t& guardpad_entry(Address addr, Axis axis, std::size_t index);
  ChecksumVectors stored_checksums(Address addr) const;
  bool resident(Address addr) const { return blocks_.count(addr) != 0; }

  BitMask mask_for(DType t) const { return protection_mask(t, policy_); }
  std::size_t capacity_rows() const { return capacity_rows_; }
  std::size_t guardpad_size() const { return guardpad_.size(); }

  /// Snapshot of the error block; `clear` resets it afterwards.
  ErrorLog mvout_error_block(bool clear = false);
  const GuardLinker& linker() const { return linker_; }
  GuardLinker& linker() { return linker_; }

 private:
  void store(Address addr, WordMatrix block, const ChecksumVectors& sums, TileCoord tile);
  std::size_t allocate_guardpad(Address addr, std::size_t slots);
  const GuardLinker::Entry& linked(Address addr) const;

  std::size_t capacity_rows_;
  MaskPolicy policy_;
  std::map<Address, WordMatrix> blocks_;
  std::vector<std::uint32_t> guardpad_;
  std::map<Address, std::pair<std::size_t, std::size_t>> guardpad_slots_;  // offset, size
  GuardLinker linker_;
};

}  // namespace npuguard
