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

#include "npuguard/guarded_memory.hpp"

#include <cstdio>

#include "npuguard/localisation.hpp"

namespace npuguard {

namespace {

unsigned ceil_log2(std::size_t x) {
  unsigned r = 0;
  while ((std::size_t{1} << r) < x) ++r;
  return r;
}

std::vector<Discrepancy> discrepancies(const std::vector<std::uint32_t>& stored,
                                       const std::vector<std::uint32_t>& fresh, std::uint32_t wrap) {
  std::vector<Discrepancy> out;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const std::uint32_t d = (stored[i] - fresh[i]) & wrap;
    if (d != 0) out.push_back({i, static_cast<double>(d)});
  }
  return out;
}

}  // namespace

ChecksumVectors checksum_generate(const WordMatrix& block, const BitMask& mask) {
  if (block.rows() == 0 || block.cols() == 0) throw std::invalid_argument("empty block");
  const unsigned width = bit_width(block(0, 0).dtype);
  const std::uint32_t wrap = low_bits(width);
  ChecksumVectors out{std::vector<std::uint32_t>(block.rows(), 0),
                      std::vector<std::uint32_t>(block.cols(), 0), width};
  for (std::size_t r = 0; r < block.rows(); ++r)
    for (std::size_t c = 0; c < block.cols(); ++c) {
      const std::uint32_t v = mask.apply(block(r, c).bits);
      out.row_sums[r] = (out.row_sums[r] + v) & wrap;
      out.col_sums[c] = (out.col_sums[c] + v) & wrap;
    }
  return out;
}

std::string to_string(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::Clean: return "clean";
    case VerifyStatus::Corrected: return "corrected";
    case VerifyStatus::ChecksumRepaired: return "checksum_repaired";
    case VerifyStatus::Uncorrectable: return "uncorrectable";
  }
  return "?";
}

std::string to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Data: return "data";
    case ErrorKind::Checksum: return "checksum";
    case ErrorKind::Tile: return "tile";
    case ErrorKind::Uncorrectable: return "uncorrectable";
  }
  return "?";
}

void write_error_log_csv(std::ostream& os, const ErrorLog& log) {
  os << "address,row,col_or_tile,kind,count,last_delta_hex\n";
  char hex[16];
  for (const auto& e : log) {
    std::snprintf(hex, sizeof hex, "0x%08X", e.last_delta);
    os << e.address << ',' << e.row << ',' << e.col_or_tile << ',' << to_string(e.kind) << ',' << e.count << ',' << hex << '\n';
  }
}

// -- GuardLinker ------------------------------------------------------------

const GuardLinker::Entry* GuardLinker::find(Address addr) const {
  auto it = entries_.find(addr);
  return it == entries_.end() ? nullptr : &it->second;
}

void GuardLinker::log(Address addr, std::int32_t row, std::int32_t col, ErrorKind kind,
                      std::uint32_t delta) {
  auto& rec = errors_[Key{addr, row, col, kind}];
  rec.address = addr;
  rec.row = row;
  rec.col_or_tile = col;
  rec.kind = kind;
  ++rec.count;
  rec.last_delta = delta;
}

ErrorLog GuardLinker::error_block() const {
  ErrorLog out;
  out.reserve(errors_.size());
  for (const auto& [_, rec] : errors_) out.push_back(rec);
  return out;
}

// -- GuardedMemory ------------------------------------------------------------

GuardedMemory::GuardedMemory(std::size_t capacity_rows, MaskPolicy policy)
    : capacity_rows_(capacity_rows), policy_(policy) {}

void GuardedMemory::mvin(Address addr, WordMatrix block, TileCoord tile) {
  if (block.empty()) throw std::invalid_argument("empty block");
  const auto sums = checksum_generate(block, mask_for(block(0, 0).dtype));
  store(addr, std::move(block), sums, tile);
}

void GuardedMemory::mvin_with_checksums(Address addr, WordMatrix block, ChecksumVectors sums,
                                        TileCoord tile) {
  if (block.empty()) throw std::invalid_argument("empty block");
  if (sums.row_sums.size() != block.rows() || sums.col_sums.size() != block.cols())
    throw std::invalid_argument("checksum vectors do not match block shape");
  store(addr, std::move(block), sums, tile);
}

void GuardedMemory::store(Address addr, WordMatrix block, const ChecksumVectors& sums, TileCoord tile) {
  const DType t = block(0, 0).dtype;
  for (const Word& w : block.flat())
    if (w.dtype != t) throw std::invalid_argument("mixed dtypes within one block");
  if (std::size_t{addr} + block.rows() > capacity_rows_)
    throw AllocationError("block of " + std::to_string(block.rows()) + " rows at address " +
                          std::to_string(addr) + " exceeds capacity of " +
                          std::to_string(capacity_rows_) + " rows");
  const std::size_t lo = addr, hi = std::size_t{addr} + block.rows();
  for (const auto& [a, b] : blocks_) {
    if (a == addr) continue;
    const std::size_t alo = a, ahi = std::size_t{a} + b.rows();
    if (lo < ahi && alo < hi)
      throw AllocationError("block at address " + std::to_string(addr) + " overlaps block at " +
                            std::to_string(a));
  }

  const std::size_t slots = block.rows() + block.cols();
  const std::size_t off = allocate_guardpad(addr, slots);
  for (std::size_t r = 0; r < block.rows(); ++r) guardpad_[off + r] = sums.row_sums[r];
  for (std::size_t c = 0; c < block.cols(); ++c) guardpad_[off + block.rows() + c] = sums.col_sums[c];
  linker_.bind(addr, GuardLinker::Entry{off, block.rows(), block.cols(), tile});
  blocks_[addr] = std::move(block);
}

std::size_t GuardedMemory::allocate_guardpad(Address addr, std::size_t slots) {
  auto it = guardpad_slots_.find(addr);
  if (it != guardpad_slots_.end() && it->second.second >= slots) return it->second.first;
  const std::size_t off = guardpad_.size();
  guardpad_.resize(off + slots, 0);
  guardpad_slots_[addr] = {off, slots};
  return off;
}

void GuardedMemory::release(Address addr) {
  blocks_.erase(addr);
  linker_.unbind(addr);
}

const GuardLinker::Entry& GuardedMemory::linked(Address addr) const {
  const auto* e = linker_.find(addr);
  if (!e || !blocks_.count(addr)) throw std::out_of_range("no linker entry for address " + std::to_string(addr));
  return *e;
}

WordMatrix& GuardedMemory::raw_data(Address addr) {
  linked(addr);
  return blocks_.at(addr);
}

const WordMatrix& GuardedMemory::raw_data(Address addr) const {
  linked(addr);
  return blocks_.at(addr);
}

std::uint32_t& GuardedMemory::guardpad_entry(Address addr, Axis axis, std::size_t index) {
  const auto& e = linked(addr);
  const std::size_t limit = axis == Axis::Row ? e.rows : e.cols;
  if (index >= limit) throw std::out_of_range("guardpad index out of range");
  return guardpad_[e.guardpad_offset + (axis == Axis::Row ? index : e.rows + index)];
}

ChecksumVectors GuardedMemory::stored_checksums(Address addr) const {
  const auto& e = linked(addr);
  const auto& block = blocks_.at(addr);
  ChecksumVectors out{{}, {}, bit_width(block(0, 0).dtype)};
  for (std::size_t r = 0; r < e.rows; ++r) out.row_sums.push_back(guardpad_[e.guardpad_offset + r]);
  for (std::size_t c = 0; c < e.cols; ++c) out.col_sums.push_back(guardpad_[e.guardpad_offset + e.rows + c]);
  return out;
}

VerifyOutcome GuardedMemory::verify_and_correct(Address addr) {
  linked(addr);
  WordMatrix& block = blocks_.at(addr);
  const DType t = block(0, 0).dtype;
  const BitMask mask = mask_for(t);
  const std::uint32_t wrap = low_bits(bit_width(t));

  VerifyOutcome out;
  out.latency_cycles = block.rows() + ceil_log2(block.cols()) + 1;

  const ChecksumVectors stored = stored_checksums(addr);
  const ChecksumVectors fresh = checksum_generate(block, mask);
  const auto rows = discrepancies(stored.row_sums, fresh.row_sums, wrap);
  const auto cols = discrepancies(stored.col_sums, fresh.col_sums, wrap);
  if (rows.empty() && cols.empty()) return out;

  const auto repair = [&](Axis axis, const std::vector<Discrepancy>& left) {
    for (const auto& d : left) {
      const auto& src = axis == Axis::Row ? fresh.row_sums : fresh.col_sums;
      guardpad_entry(addr, axis, d.index) = src[d.index];
      out.repairs.push_back({axis, d.index});
      linker_.log(addr, axis == Axis::Row ? static_cast<std::int32_t>(d.index) : -1,
                  axis == Axis::Col ? static_cast<std::int32_t>(d.index) : -1, ErrorKind::Checksum,
                  static_cast<std::uint32_t>(d.delta));
    }
  };

  // A lone entry on one axis: the checksum is wrong, not the data. Several
  // entries on one axis can also be data flips whose deltas cancel on the
  // other axis, so those are left to the uncorrectable path.
  if (rows.empty() || cols.empty()) {
    const auto& lone = rows.empty() ? cols : rows;
    if (lone.size() == 1) {
      repair(rows.empty() ? Axis::Col : Axis::Row, lone);
      out.status = VerifyStatus::ChecksumRepaired;
    } else {
      out.status = VerifyStatus::Uncorrectable;
      linker_.log(addr, -1, -1, ErrorKind::Uncorrectable, 0);
    }
    return out;
  }

  const CrossLocalisation loc = cross_localise(rows, cols, exact_match);
  for (const auto& p : loc.pairs) {
    Word& w = block(p.row, p.col);
    const auto delta = static_cast<std::uint32_t>(p.delta);
    const std::uint32_t fixed = (mask.apply(w.bits) + delta) & wrap;
    w.bits = (w.bits & ~mask.bits) | (fixed & mask.bits);
    out.corrections.push_back({p.row, p.col, delta});
    linker_.log(addr, static_cast<std::int32_t>(p.row), static_cast<std::int32_t>(p.col), ErrorKind::Data,
                delta);
  }

  const bool rows_left = !loc.rows_left.empty();
  const bool cols_left = !loc.cols_left.empty();
  if (!loc.ambiguous && !out.corrections.empty() && rows_left != cols_left)
    repair(rows_left ? Axis::Row : Axis::Col, rows_left ? loc.rows_left : loc.cols_left);

  const ChecksumVectors after = checksum_generate(block, mask);
  const ChecksumVectors now = stored_checksums(addr);
  if (!out.corrections.empty() && after == now) {
    out.status = VerifyStatus::Corrected;
  } else {
    out.status = VerifyStatus::Uncorrectable;
    linker_.log(addr, -1, -1, ErrorKind::Uncorrectable, 0);
  }
  return out;
}

GuardedMemory::ReadResult GuardedMemory::read(Address addr, std::size_t row0, std::size_t col0,
                                              std::size_t rows, std::size_t cols) {
  ReadResult res;
  res.outcome = verify_and_correct(addr);
  const WordMatrix& block = blocks_.at(addr);
  if (rows == 0 || cols == 0 || row0 + rows > block.rows() || col0 + cols > block.cols())
    throw std::out_of_range("sub-block outside resident block");
  res.data = WordMatrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) res.data(r, c) = block(row0 + r, col0 + c);
  res.sums = checksum_generate(res.data, mask_for(res.data(0, 0).dtype));
  return res;
}

GuardedMemory::ReadResult GuardedMemory::read(Address addr) {
  const auto& e = linked(addr);
  return read(addr, 0, 0, e.rows, e.cols);
}

ErrorLog GuardedMemory::mvout_error_block(bool clear) {
  ErrorLog log = linker_.error_block();
  if (clear) linker_.clear_errors();
  return log;
}

}  // namespace npuguard
