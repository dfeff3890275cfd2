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

#include <doctest.h>

#include <algorithm>

#include "npuguard/campaign.hpp"

using namespace npuguard;

namespace {

CampaignConfig small_config() {
  CampaignConfig c;
  c.trials = 20;
  c.faults.rates = {1e-4};
  return c;
}

const PreparedWorkload& mlp_workload() {
  static const PreparedWorkload wl = prepare_workload(small_config());
  return wl;
}

const ExposureSite& site(const PreparedWorkload& wl, const std::string& target) {
  const auto it = std::find_if(wl.sites.begin(), wl.sites.end(), [&](const auto& s) { return s.target == target; });
  REQUIRE(it != wl.sites.end());
  return *it;
}

}  // namespace

TEST_SUITE("campaign") {
  TEST_CASE("fault-free protected run equals the unprotected one") {
    const auto& wl = mlp_workload();
    for (std::size_t b = 0; b < 3; ++b) {
      const auto p = run_trial(wl, FaultPlan{}, true, b);
      const auto u = run_trial(wl, FaultPlan{}, false, b);
      CHECK(p.output == u.output);
      CHECK(p.events.empty());
      CHECK(p.error_log.empty());
      CHECK(p.samples == wl.config.workload.batch);
    }
  }

  TEST_CASE("quantised pipeline reproduces the integer reference model") {
    const auto& wl = mlp_workload();
    std::size_t correct = 0, samples = 0;
    for (std::size_t b = 0; b < wl.batches.size(); ++b) {
      const auto r = run_trial(wl, FaultPlan{}, false, b);
      correct += r.correct;
      samples += r.samples;
    }
    REQUIRE(wl.reference_accuracy.has_value());
    CHECK(static_cast<double>(correct) / static_cast<double>(samples) == *wl.reference_accuracy);
  }

  TEST_CASE("a resident memory flip is corrected at the next read") {
    const auto& wl = mlp_workload();
    FaultPlan plan;
    plan.transients.push_back({SiteKind::MemoryResidency, "w/l0/k1n0|data", 37, 6, 0});
    const auto golden = run_trial(wl, FaultPlan{}, false, 0);
    const auto p = run_trial(wl, plan, true, 0);
    REQUIRE(p.faults.size() == 1);
    CHECK(p.faults[0].consequential);
    CHECK(p.faults[0].detected);
    CHECK(p.faults[0].corrected);
    CHECK(p.output == golden.output);
    REQUIRE(p.events.size() == 1);
    CHECK(p.events[0].status == "corrected");
    CHECK(p.events[0].component == Component::Memory);
  }

  TEST_CASE("unprotected replay corrupts silently") {
    const auto& wl = mlp_workload();
    FaultPlan plan;
    plan.transients.push_back({SiteKind::PEPartialSum, "g/l0/m0n0k2|psum", 5 * 256 + 3 * 16 + 7, 20, 0});
    const auto golden = run_trial(wl, FaultPlan{}, false, 0);
    const auto u = run_trial(wl, plan, false, 0);
    const auto p = run_trial(wl, plan, true, 0);
    CHECK(u.events.empty());
    CHECK(p.output == golden.output);
    CHECK(p.faults[0].corrected);
    CHECK(p.events.at(0).component == Component::Array);
  }

  TEST_CASE("permanent forwarded-input fault in WS reports its tile in every group") {
    auto cfg = small_config();
    cfg.faults.permanents.push_back({SiteKind::PEPartialSum, "array|fwd", 3 * 16 + 5, 6, true});
    const auto wl = prepare_workload(cfg);
    const auto p = run_trial(wl, plan_for_trial(wl, 0.0, 0, 0), true, 0);
    std::size_t tile_events = 0;
    for (const auto& e : p.events)
      if (e.status == "tile_fault") ++tile_events;
    CHECK(tile_events > 1);
    std::uint64_t tile_records = 0;
    for (const auto& r : p.error_log)
      if (r.kind == ErrorKind::Tile) {
        CHECK(r.col_or_tile == 5);
        tile_records += r.count;
      }
    CHECK(tile_records == tile_events);
  }

  TEST_CASE("stuck register bit is corrected on every read") {
    auto cfg = small_config();
    cfg.faults.permanents.push_back({SiteKind::RegisterBit, "reg/l0|cw", 0, 5, true});
    const auto wl = prepare_workload(cfg);
    const auto golden = run_trial(wl, FaultPlan{}, false, 0);
    const auto p = run_trial(wl, plan_for_trial(wl, 0.0, 0, 0), true, 0);
    CHECK(p.output == golden.output);
  }

  TEST_CASE("stuck guardpad bit takes the checksum repair path") {
    auto cfg = small_config();
    const auto probe = prepare_workload(cfg);
    const auto& gp = site(probe, "x/l0/m0k0|gp");
    for (unsigned bit = 0; bit < gp.word_bits; ++bit) {
      cfg.faults.permanents = {{SiteKind::GuardpadCell, gp.target, 2, bit, true}};
      const auto wl = prepare_workload(cfg);
      const auto golden = run_trial(wl, FaultPlan{}, false, 0);
      const auto p = run_trial(wl, plan_for_trial(wl, 0.0, 0, 0), true, 0);
      CHECK(p.output == golden.output);
      for (const auto& e : p.events) CHECK(e.status == "checksum_repaired");
    }
  }

  TEST_CASE("rate zero leaves coverages undefined") {
    auto cfg = small_config();
    cfg.faults.rates = {0.0};
    cfg.trials = 5;
    const auto run = run_campaign(cfg);
    const auto& r = run.report.rates.at(0);
    CHECK_FALSE(r.detection_coverage.has_value());
    CHECK_FALSE(r.correction_coverage.has_value());
    CHECK(r.accuracy_protected == r.accuracy_unprotected);
    CHECK(run.report.decoupled);
  }

  TEST_CASE("accounting invariants hold at every rate") {
    auto cfg = small_config();
    cfg.faults.rates = {1e-4, 1e-3, 1e-2};
    const auto run = run_campaign(cfg);
    for (const auto& r : run.report.rates) {
      CHECK(r.totals.corrected <= r.totals.detected);
      CHECK(r.totals.detected <= r.totals.consequential);
      CHECK(r.totals.consequential <= r.totals.injected);
      if (r.detection_coverage) CHECK(*r.detection_coverage <= 1.0);
      SiteCounts sum;
      for (const auto& [k, c] : r.per_site) {
        sum.injected += c.injected;
        sum.corrected += c.corrected;
      }
      CHECK(sum.injected == r.totals.injected);
      CHECK(sum.corrected == r.totals.corrected);
    }
    CHECK(run.trials.size() == 60);
  }

  TEST_CASE("single gemm workload in both dataflows and float types") {
    for (Dataflow d : {Dataflow::WS, Dataflow::OS})
      for (DType t : {DType::Int8, DType::Fp32, DType::Bf16}) {
        CampaignConfig cfg;
        cfg.geometry = {4, 2, d};
        cfg.workload.kind = WorkloadKind::SingleGemm;
        cfg.workload.dtype = t;
        cfg.trials = 10;
        cfg.faults.rates = {1e-3};
        const auto run = run_campaign(cfg);
        CHECK(run.report.decoupled);
        const auto& r = run.report.rates.at(0);
        CHECK(r.totals.injected > 0);
        CHECK(r.totals.detected <= r.totals.consequential);
      }
  }

  TEST_CASE("configuration errors surface before execution") {
    CampaignConfig cfg;
    cfg.geometry = {1, 1, Dataflow::WS};
    CHECK_THROWS_AS(prepare_workload(cfg), ConfigurationError);
    cfg = small_config();
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg = small_config();
    cfg.workload.layers = {32, 10};
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg = small_config();
    cfg.faults.permanents.push_back({SiteKind::PEPartialSum, "array|psum", 9999, 0, true});
    CHECK_THROWS_AS(prepare_workload(cfg), ConfigurationError);
  }

  TEST_CASE("modeled latencies") {
    const auto s = configure_shields({16, 1, Dataflow::WS});
    const auto lat = modeled_latency(s, 16, 16, 10);
    CHECK(lat.at(Component::Array) == pipeline_schedule(1, s).worst_detection_latency_cycles);
    CHECK(lat.at(Component::Memory) == 16 + 4 + 1);
    CHECK(lat.at(Component::Register) == 2);
  }

  TEST_CASE("sensitivity sweep at rate zero equals the baseline") {
    SensitivityConfig cfg;
    cfg.layers = {64, 32, 10};
    cfg.rates = {0.0, 1e-5};
    cfg.classes = {BitClass::Mantissa};
    cfg.trials = 3;
    cfg.eval_samples = 64;
    const auto rep = sensitivity_sweep(cfg);
    REQUIRE(rep.cells.size() == 2);
    CHECK(rep.cells[0].accuracy == rep.baseline_accuracy);
    CHECK(rep.cells[0].mean_flips == 0.0);
    CHECK(rep.cells[1].mean_flips > 0.0);
  }
}
