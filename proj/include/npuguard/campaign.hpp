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
 * @file campaign.hpp
 * @brief End-to-end trials, fault campaigns and the bit-position sweep.
 *
 * A trial pushes one batch through the modelled NPU: operands are moved into
 * guarded scratchpad/accumulator memory, every tile-group runs on the array
 * next to the shield, results are written back with fresh checksums, and the
 * nonlinear units finish the layer. Scale registers live in the SEC-DED
 * register file.
 *
 * Each fault is charged to the unit it first lands in (a memory block, a
 * tile-group, a register or a nonlinear call). A unit's faults are
 * consequential when its raw result differs from what it would have
 * produced without them, detected when its checker fires and corrected when
 * its checked result equals that local oracle. Flips outside the protection
 * mask of their word are never consequential.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "npuguard/ecc.hpp"
#include "npuguard/fault_injector.hpp"
#include "npuguard/guarded_memory.hpp"
#include "npuguard/nonlinear_guard.hpp"
#include "npuguard/systolic_shield.hpp"
#include "npuguard/tiny_mlp.hpp"

namespace npuguard {

enum class WorkloadKind { SingleGemm, TinyMlp };
std::string to_string(WorkloadKind k);
WorkloadKind parse_workload_kind(std::string_view s);

enum class Component { Memory, Array, Register, Nonlinear };
inline constexpr Component kAllComponents[] = {Component::Memory, Component::Array, Component::Register,
                                               Component::Nonlinear};
std::string to_string(Component c);

struct WorkloadConfig {
  WorkloadKind kind = WorkloadKind::TinyMlp;
  DType dtype = DType::Int8;
  /// SingleGemm: k-tiles accumulated into each N x N output tile.
  std::size_t gemm_groups = 4;
  std::uint64_t gemm_seed = 5;
  /// TinyMlp widths including input and class count.
  std::vector<std::size_t> layers{64, 32, 10};
  std::size_t batch = 16;          // samples per trial
  std::size_t test_samples = 256;  // trials cycle through the test set
  std::size_t train_samples = 1024;
  BlobSpec blobs{64, 10, 1.0, 2.0, 7};
  TrainConfig train;
};

struct ProtectionConfig {
  bool memory = true;
  bool array = true;
  bool registers = true;
  bool nonlinear = true;
  MaskPolicy mask = MaskPolicy::top_sensitive();
  unsigned redundant_copies = 3;
  ShieldTolerance shield_tolerance;
  NonlinearTolerance nonlinear_tolerance;
};

struct FaultConfig {
  std::vector<double> rates{1e-5, 1e-4, 1e-3, 1e-2};
  /// Relative exposure per bit of each site kind; missing kinds use 1,
  /// except MvinStream which defaults to 0.
  std::map<SiteKind, double> site_weights;
  std::vector<PermanentFault> permanents;

  double weight(SiteKind k) const;
};

struct CampaignConfig {
  ArrayGeometry geometry{16, 1, Dataflow::WS};
  WorkloadConfig workload;
  ProtectionConfig protection;
  FaultConfig faults;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  double frequency_mhz = 500.0;

  /// Throws ConfigurationError on inconsistent settings.
  void validate() const;
};

struct PreparedLayer {
  WordMatrix w;             // in_pad x out_pad, input type
  std::vector<Word> bias;   // out_pad, accumulator type
  float multiplier = 1.0f;  // requantisation / dequantisation scale
  bool relu = false;
  bool uses_scale = true;
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Everything that is identical across trials: weights, input batches,
/// exposure sites and the shield configuration.
struct PreparedWorkload {
  CampaignConfig config;
  ShieldConfig shield;
  std::size_t n = 0;  // tile dimension I*J
  std::vector<PreparedLayer> layers;
  std::vector<WordMatrix> batches;
  std::vector<std::vector<std::uint32_t>> labels;
  std::size_t batch_rows = 0;  // real rows per batch
  std::size_t classes = 0;
  bool softmax_head = false;
  std::uint64_t input_bits = 0;  // bits of the original input (data, weights, biases)
  std::vector<ExposureSite> sites;
  std::uint64_t groups_per_trial = 0;
  std::optional<double> float_accuracy;  // trained binary32 model on the test set
  std::optional<double> reference_accuracy;  // integer reference model (Int8 only)
};

/// Trains/quantises or generates the workload. Throws ConfigurationError.
PreparedWorkload prepare_workload(const CampaignConfig& cfg);

struct FaultOutcome {
  SiteKind kind = SiteKind::MemoryResidency;
  std::string target;
  Component component = Component::Memory;
  bool consequential = false;
  bool detected = false;
  bool corrected = false;
};

struct DetectionEvent {
  std::string unit;
  Component component = Component::Memory;
  std::string status;
  std::uint64_t cycle = 0;
  std::uint64_t latency_cycles = 0;
};

struct TrialResult {
  std::uint64_t trial = 0;
  std::size_t batch = 0;
  /// One entry per transient event of the plan, in plan order (protected runs).
  std::vector<FaultOutcome> faults;
  std::vector<DetectionEvent> events;
  std::vector<Word> output;  // softmax rows or accumulator tiles, row-major
  std::size_t samples = 0;
  std::size_t correct = 0;
  std::uint64_t cycles = 0;
  ErrorLog error_log;
};

/// Runs one batch (trial % batches) under `plan`. With `protect` false every
/// checker is bypassed and faults propagate silently.
TrialResult run_trial(const PreparedWorkload& wl, const FaultPlan& plan, bool protect, std::uint64_t trial);

/// Transient plan for one trial at one rate plus the configured permanents.
FaultPlan plan_for_trial(const PreparedWorkload& wl, double rate, std::size_t rate_index, std::uint64_t trial);

struct SiteCounts {
  std::uint64_t injected = 0;
  std::uint64_t consequential = 0;
  std::uint64_t detected = 0;
  std::uint64_t corrected = 0;
};

struct LatencyStats {
  std::uint64_t events = 0;
  std::uint64_t worst_cycles = 0;
  double mean_cycles = 0.0;
};

struct RateReport {
  double rate = 0.0;
  std::uint64_t trials = 0;
  SiteCounts totals;
  std::optional<double> detection_coverage;   // detected / consequential
  std::optional<double> correction_coverage;  // corrected / detected
  std::optional<double> raw_detection_coverage;  // detected / injected
  std::optional<double> accuracy_protected;
  std::optional<double> accuracy_unprotected;
  std::uint64_t corrupted_outputs_protected = 0;    // trials whose output differs from golden
  std::uint64_t corrupted_outputs_unprotected = 0;
  std::map<Component, LatencyStats> latency;
  std::map<SiteKind, SiteCounts> per_site;
};

struct CampaignReport {
  CampaignConfig config;
  ShieldConfig shield;
  TimingReport timing;
  std::uint64_t input_bits = 0;
  std::optional<double> golden_accuracy;
  std::optional<double> float_accuracy;
  std::optional<double> reference_accuracy;
  bool decoupled = true;  // fault-free protected outputs equal unprotected ones
  std::map<Component, std::uint64_t> modeled_worst_latency_cycles;
  std::vector<RateReport> rates;
};

struct TrialRow {
  double rate = 0.0;
  std::uint64_t trial = 0;
  SiteCounts counts;
  std::size_t samples = 0;
  std::size_t correct_protected = 0;
  std::size_t correct_unprotected = 0;
  bool output_ok_protected = true;
  bool output_ok_unprotected = true;
};

struct EventRow {
  double rate = 0.0;
  std::uint64_t trial = 0;
  DetectionEvent event;
};

struct CampaignRun {
  CampaignReport report;
  std::vector<TrialRow> trials;
  std::vector<EventRow> events;
  ErrorLog error_log;  // summed over all protected trials
};

CampaignRun run_campaign(const CampaignConfig& cfg);
CampaignRun run_campaign(const PreparedWorkload& wl);

/// Worst detection latency of each checker at the given geometry and block
/// size (rows of a memory block, length of a nonlinear vector).
std::map<Component, std::uint64_t> modeled_latency(const ShieldConfig& shield, std::size_t block_rows,
                                                   std::size_t block_cols, std::size_t vector_len);

// -- bit-position sensitivity -------------------------------------------------

struct SensitivityConfig {
  BlobSpec blobs{64, 10, 1.0, 2.0, 7};
  std::vector<std::size_t> layers{64, 256, 128, 10};
  TrainConfig train;
  std::size_t train_samples = 1024;
  std::size_t eval_samples = 128;
  std::vector<BitClass> classes{BitClass::Sign, BitClass::ExponentHigh, BitClass::SignExponent, BitClass::Mantissa};
  std::vector<double> rates{0.0, 1e-6, 1e-5, 1e-4};
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct SensitivityCell {
  BitClass bit_class = BitClass::All;
  double rate = 0.0;
  double accuracy = 0.0;       // mean over trials
  double drop_points = 0.0;    // (baseline - accuracy) * 100
  double mean_flips = 0.0;
};

struct SensitivityReport {
  SensitivityConfig config;
  double baseline_accuracy = 0.0;
  std::uint64_t resident_bits = 0;
  std::vector<SensitivityCell> cells;
};

/// Unprotected binary32 MLP with flips in resident weights and activations.
/// Each trial draws Binomial(resident bits, rate) flips; each lands on a
/// uniform resident word and a uniform bit of the selected class.
SensitivityReport sensitivity_sweep(const SensitivityConfig& cfg);

}  // namespace npuguard
