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

#include "npuguard/ecc.hpp"

#include <bit>
#include <stdexcept>

namespace npuguard::ecc {

namespace {

unsigned ceil_log2(std::uint64_t x) {
  unsigned r = 0;
  while ((std::uint64_t{1} << r) < x) ++r;
  return r;
}

bool is_power_of_two(unsigned p) { return p != 0 && (p & (p - 1)) == 0; }

unsigned parity(std::uint64_t v) { return static_cast<unsigned>(std::popcount(v)) & 1u; }

// Codeword positions (not counting position 0) covered by partial parity i.
std::uint64_t group_mask(unsigned i, unsigned last_position) {
  std::uint64_t m = 0;
  for (unsigned p = 1; p <= last_position; ++p)
    if (p & (1u << i)) m |= std::uint64_t{1} << p;
  return m;
}

std::uint64_t extract_data(const Codeword& cw) {
  std::uint64_t data = 0;
  unsigned bit = 0;
  const unsigned last = cw.width() - 1;
  for (unsigned p = 1; p <= last; ++p) {
    if (is_power_of_two(p)) continue;
    if ((cw.bits >> p) & 1u) data |= std::uint64_t{1} << bit;
    ++bit;
  }
  return data;
}

constexpr unsigned kWantParity = kOddParity ? 1u : 0u;

}  // namespace

unsigned check_width(unsigned data_width) { return ceil_log2(std::uint64_t{data_width} + 1) + 1; }

unsigned partial_parity_count(unsigned data_width) { return check_width(data_width) - 1; }

bool is_encodable(unsigned data_width) {
  if (data_width == 0 || data_width > kMaxDataWidth) return false;
  const unsigned r = partial_parity_count(data_width);
  return (std::uint64_t{1} << r) >= std::uint64_t{data_width} + r + 1;
}

unsigned data_position(unsigned data_width, unsigned data_bit) {
  if (data_bit >= data_width) throw std::out_of_range("data bit outside register width");
  unsigned seen = 0;
  for (unsigned p = 1;; ++p) {
    if (is_power_of_two(p)) continue;
    if (seen++ == data_bit) return p;
  }
}

Codeword encode(std::uint64_t data, unsigned data_width) {
  if (!is_encodable(data_width))
    throw std::invalid_argument("data width " + std::to_string(data_width) +
                                " cannot be SEC-DED encoded with the check-bit budget");
  Codeword cw{data_width, 0};
  const unsigned last = cw.width() - 1;
  unsigned bit = 0;
  for (unsigned p = 1; p <= last; ++p) {
    if (is_power_of_two(p)) continue;
    if ((data >> bit) & 1u) cw.bits |= std::uint64_t{1} << p;
    ++bit;
  }
  const unsigned r = partial_parity_count(data_width);
  for (unsigned i = 0; i < r; ++i) {
    if (parity(cw.bits & group_mask(i, last)) != kWantParity) cw.bits |= std::uint64_t{1} << (1u << i);
  }
  if (parity(cw.bits) != kWantParity) cw.bits |= 1u;
  return cw;
}

DecodeResult decode(const Codeword& cw) {
  const unsigned last = cw.width() - 1;
  const unsigned r = partial_parity_count(cw.data_width);
  unsigned syndrome = 0;
  for (unsigned i = 0; i < r; ++i)
    if (parity(cw.bits & group_mask(i, last)) != kWantParity) syndrome |= 1u << i;
  const bool global_violated = parity(cw.bits) != kWantParity;

  DecodeResult out;
  if (syndrome == 0 && !global_violated) {
    out.data = extract_data(cw);
    return out;
  }
  if (global_violated && syndrome <= last) {
    Codeword fixed = cw;
    fixed.bits ^= std::uint64_t{1} << syndrome;  // syndrome 0 -> global parity bit
    out.data = extract_data(fixed);
    out.status = DecodeStatus::Corrected;
    out.position = syndrome;
    return out;
  }
  // Even number of flips, or a syndrome pointing past the codeword.
  out.data = extract_data(cw);
  out.status = DecodeStatus::DoubleError;
  return out;
}

Codeword flip(Codeword cw, unsigned position) {
  if (position >= cw.width()) throw std::out_of_range("codeword position out of range");
  cw.bits ^= std::uint64_t{1} << position;
  return cw;
}

std::string to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::Clean: return "clean";
    case DecodeStatus::Corrected: return "corrected";
    case DecodeStatus::DoubleError: return "double_error";
  }
  return "?";
}

// -- RegisterFile ------------------------------------------------------------

RegisterFile::Entry& RegisterFile::entry(const std::string& id) {
  auto it = regs_.find(id);
  if (it == regs_.end()) throw std::out_of_range("unknown register: " + id);
  return it->second;
}

const RegisterFile::Entry& RegisterFile::entry(const std::string& id) const {
  auto it = regs_.find(id);
  if (it == regs_.end()) throw std::out_of_range("unknown register: " + id);
  return it->second;
}

void RegisterFile::declare(const std::string& id, unsigned data_width) {
  regs_[id] = Entry{encode(0, data_width), 0, 0, {}};
}

unsigned RegisterFile::width(const std::string& id) const { return entry(id).cw.data_width; }

void RegisterFile::write(const std::string& id, std::uint64_t data) {
  Entry& e = entry(id);
  e.cw = encode(data, e.cw.data_width);
  apply_stuck(e);
}

DecodeResult RegisterFile::read(const std::string& id) {
  Entry& e = entry(id);
  apply_stuck(e);
  ++e.stats.reads;
  DecodeResult res = decode(e.cw);
  if (res.status == DecodeStatus::Corrected) {
    ++e.stats.corrected;
    e.cw = encode(res.data, e.cw.data_width);  // scrub
    apply_stuck(e);
  } else if (res.status == DecodeStatus::DoubleError) {
    ++e.stats.double_errors;
  }
  return res;
}

void RegisterFile::inject_flip(const std::string& id, unsigned position) {
  Entry& e = entry(id);
  e.cw = flip(e.cw, position);
}

void RegisterFile::set_stuck(const std::string& id, unsigned position, bool value) {
  Entry& e = entry(id);
  if (position >= e.cw.width()) throw std::out_of_range("codeword position out of range");
  const std::uint64_t bit = std::uint64_t{1} << position;
  e.stuck_mask |= bit;
  e.stuck_value = value ? (e.stuck_value | bit) : (e.stuck_value & ~bit);
  apply_stuck(e);
}

void RegisterFile::clear_stuck(const std::string& id) {
  Entry& e = entry(id);
  e.stuck_mask = 0;
  e.stuck_value = 0;
}

const Codeword& RegisterFile::raw(const std::string& id) const { return entry(id).cw; }

const RegisterFile::Stats& RegisterFile::stats(const std::string& id) const { return entry(id).stats; }

std::vector<std::string> RegisterFile::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : regs_) out.push_back(id);
  return out;
}

}  // namespace npuguard::ecc
