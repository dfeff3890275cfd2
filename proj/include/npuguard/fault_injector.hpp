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
 * @file fault_injector.hpp
 * @brief Seeded transient and permanent fault plans over named exposure sites.
 *
 * A site is a named group of equally sized words that data passes through
 * (a memory block, an operand stream, a register, a PE register file). The
 * number of transient flips per pass is Binomial(input bits, rate), where
 * "input bits" is the size of the original input rather than of the sites;
 * each flip then lands on a site chosen in proportion to bits x weight and
 * on a uniform word and bit within it.
 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "npuguard/errors.hpp"
#include "npuguard/numerics.hpp"

namespace npuguard {

enum class SiteKind {
  MvinStream,
  MemoryResidency,
  ArrayInput,
  PEPartialSum,
  Writeback,
  GuardpadCell,
  RegisterBit,
  NonlinearOutput,
};

inline constexpr SiteKind kAllSiteKinds[] = {
    SiteKind::MvinStream,   SiteKind::MemoryResidency, SiteKind::ArrayInput,  SiteKind::PEPartialSum,
    SiteKind::Writeback,    SiteKind::GuardpadCell,    SiteKind::RegisterBit, SiteKind::NonlinearOutput,
};

std::string_view to_string(SiteKind k);
/// Throws ConfigurationError for an unknown name.
SiteKind parse_site_kind(std::string_view name);

struct ExposureSite {
  SiteKind kind = SiteKind::MemoryResidency;
  std::string target;     // consumer-defined name, e.g. "l0/g3/A"
  std::uint64_t words = 0;
  unsigned word_bits = 0;
  double weight = 1.0;    // relative exposure per bit

  std::uint64_t bits() const { return words * word_bits; }
};

struct TransientEvent {
  SiteKind kind = SiteKind::MemoryResidency;
  std::string target;
  std::uint64_t word = 0;
  unsigned bit = 0;
  std::uint64_t time = 0;  // exposure pass within the trial

  friend bool operator==(const TransientEvent&, const TransientEvent&) = default;
};

struct PermanentFault {
  SiteKind kind = SiteKind::PEPartialSum;
  std::string target;
  std::uint64_t word = 0;
  unsigned bit = 0;
  bool value = false;

  friend bool operator==(const PermanentFault&, const PermanentFault&) = default;
};

struct FaultPlan {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  double rate = 0.0;
  std::uint64_t input_bits = 0;
  std::uint64_t passes = 0;
  std::vector<TransientEvent> transients;
  std::vector<PermanentFault> permanents;

  bool empty() const { return transients.empty() && permanents.empty(); }
  friend bool operator==(const FaultPlan&, const FaultPlan&) = default;

  /// Events and faults at one site, in plan order.
  std::vector<TransientEvent> transients_at(SiteKind kind, std::string_view target) const;
  std::vector<PermanentFault> permanents_at(SiteKind kind, std::string_view target) const;
};

/// Samples `passes` independent exposure passes for one trial. The random
/// stream is keyed by (seed, trial, pass), so plans for different trials
/// are independent and reproducible in isolation.
/// Throws ConfigurationError for a rate outside [0, 1] or for a positive
/// rate with no exposed site bits.
FaultPlan plan_transient(double rate, std::uint64_t input_bit_count, std::span<const ExposureSite> sites,
                         std::uint64_t seed, std::uint64_t trial = 0, std::uint64_t passes = 1);

/// A single stuck-at fault at `word`/`bit` of `site`.
/// Throws ConfigurationError if the coordinates fall outside the site.
FaultPlan plan_permanent(const ExposureSite& site, std::uint64_t word, unsigned bit, bool stuck_value);

/// XORs every transient scheduled for (site, word, time), then forces every
/// stuck bit of (site, word). Stuck bits therefore win over transients.
Word apply(const FaultPlan& plan, SiteKind kind, std::string_view target, std::uint64_t word, Word w,
           std::uint64_t time = 0);
std::uint32_t apply_raw(const FaultPlan& plan, SiteKind kind, std::string_view target, std::uint64_t word,
                        std::uint32_t raw, std::uint64_t time = 0);

/// Appends the events of `other` to `plan` (seeds/rates of `plan` are kept).
void merge_into(FaultPlan& plan, const FaultPlan& other);

}  // namespace npuguard
