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

#include "npuguard/fault_injector.hpp"

#include <algorithm>

#include "npuguard/rng.hpp"

namespace npuguard {

std::string_view to_string(SiteKind k) {
  switch (k) {
    case SiteKind::MvinStream: return "MvinStream";
    case SiteKind::MemoryResidency: return "MemoryResidency";
    case SiteKind::ArrayInput: return "ArrayInput";
    case SiteKind::PEPartialSum: return "PEPartialSum";
    case SiteKind::Writeback: return "Writeback";
    case SiteKind::GuardpadCell: return "GuardpadCell";
    case SiteKind::RegisterBit: return "RegisterBit";
    case SiteKind::NonlinearOutput: return "NonlinearOutput";
  }
  return "?";
}

SiteKind parse_site_kind(std::string_view name) {
  for (const SiteKind k : kAllSiteKinds)
    if (to_string(k) == name) return k;
  throw ConfigurationError("unknown exposure site: " + std::string(name));
}

std::vector<TransientEvent> FaultPlan::transients_at(SiteKind kind, std::string_view target) const {
  std::vector<TransientEvent> out;
  for (const auto& e : transients)
    if (e.kind == kind && e.target == target) out.push_back(e);
  return out;
}

std::vector<PermanentFault> FaultPlan::permanents_at(SiteKind kind, std::string_view target) const {
  std::vector<PermanentFault> out;
  for (const auto& f : permanents)
    if (f.kind == kind && f.target == target) out.push_back(f);
  return out;
}

FaultPlan plan_transient(double rate, std::uint64_t input_bit_count, std::span<const ExposureSite> sites,
                         std::uint64_t seed, std::uint64_t trial, std::uint64_t passes) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigurationError("fault rate must lie in [0, 1]");
  FaultPlan plan;
  plan.seed = seed;
  plan.trial = trial;
  plan.rate = rate;
  plan.input_bits = input_bit_count;
  plan.passes = passes;

  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& s : sites) {
    if (s.weight < 0.0) throw ConfigurationError("site weight must be non-negative");
    total += static_cast<double>(s.bits()) * s.weight;
    cumulative.push_back(total);
  }
  if (rate > 0.0 && input_bit_count > 0 && !(total > 0.0))
    throw ConfigurationError("positive fault rate needs at least one exposed site");

  for (std::uint64_t pass = 0; pass < passes; ++pass) {
    CounterRng rng(seed, trial, pass);
    const std::uint64_t count = rng.binomial(input_bit_count, rate);
    for (std::uint64_t f = 0; f < count; ++f) {
      const double u = rng.uniform() * total;
      // upper_bound never lands on a zero-exposure site except at u == total.
      std::size_t idx = static_cast<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      if (idx == cumulative.size()) --idx;
      while (sites[idx].bits() == 0 || sites[idx].weight == 0.0) --idx;
      const auto& site = sites[idx];
      TransientEvent e;
      e.kind = site.kind;
      e.target = site.target;
      e.word = rng.below(site.words);
      e.bit = static_cast<unsigned>(rng.below(site.word_bits));
      e.time = pass;
      plan.transients.push_back(std::move(e));
    }
  }
  return plan;
}

FaultPlan plan_permanent(const ExposureSite& site, std::uint64_t word, unsigned bit, bool stuck_value) {
  if (word >= site.words || bit >= site.word_bits)
    throw ConfigurationError("permanent fault coordinates outside site " + site.target);
  FaultPlan plan;
  plan.permanents.push_back({site.kind, site.target, word, bit, stuck_value});
  return plan;
}

std::uint32_t apply_raw(const FaultPlan& plan, SiteKind kind, std::string_view target, std::uint64_t word,
                        std::uint32_t raw, std::uint64_t time) {
  for (const auto& e : plan.transients)
    if (e.kind == kind && e.word == word && e.time == time && e.target == target) raw ^= 1u << e.bit;
  for (const auto& f : plan.permanents)
    if (f.kind == kind && f.word == word && f.target == target) {
      const std::uint32_t bit = 1u << f.bit;
      raw = f.value ? (raw | bit) : (raw & ~bit);
    }
  return raw;
}

Word apply(const FaultPlan& plan, SiteKind kind, std::string_view target, std::uint64_t word, Word w,
           std::uint64_t time) {
  return Word::from_bits(apply_raw(plan, kind, target, word, w.bits, time), w.dtype);
}

void merge_into(FaultPlan& plan, const FaultPlan& other) {
  plan.transients.insert(plan.transients.end(), other.transients.begin(), other.transients.end());
  plan.permanents.insert(plan.permanents.end(), other.permanents.begin(), other.permanents.end());
}

}  // namespace npuguard
