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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "npuguard/report.hpp"
#include "npuguard/rng.hpp"

using namespace npuguard;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void run(const char* id, const char* title, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " exception: " << e.what();
  }
  if (!v.pass) ++failures;
  std::printf("%s %s %s:%s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.str().c_str());
  std::fflush(stdout);
}

// -- 1 ----------------------------------------------------------------------

void ecc_exhaustive(Verdict& v) {
  const auto t0 = Clock::now();
  CounterRng rng(101);
  std::uint64_t singles = 0, single_ok = 0, doubles = 0, double_ok = 0, silent = 0;
  for (unsigned a : {8u, 16u, 32u}) {
    for (int s = 0; s < 256; ++s) {
      const std::uint64_t d = rng() & ((1ull << a) - 1);
      const auto cw = ecc::encode(d, a);
      const unsigned w = cw.width();
      for (unsigned p = 0; p < w; ++p) {
        const auto r = ecc::decode(ecc::flip(cw, p));
        ++singles;
        single_ok += r.status == ecc::DecodeStatus::Corrected && r.data == d;
        for (unsigned q = p + 1; q < w; ++q) {
          const auto r2 = ecc::decode(ecc::flip(ecc::flip(cw, p), q));
          ++doubles;
          double_ok += r2.status == ecc::DecodeStatus::DoubleError;
          silent += r2.status != ecc::DecodeStatus::DoubleError && r2.data != d;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  v.detail << " singles " << single_ok << "/" << singles << " corrected, doubles " << double_ok << "/" << doubles
           << " flagged, silent miscorrections " << silent << ", " << secs << " s";
  v.require(single_ok == singles, "single flips");
  v.require(double_ok == doubles && silent == 0, "double flips");
  v.require(secs < 10.0, "runtime");
}

// -- 2 ----------------------------------------------------------------------

WordMatrix random_block(CounterRng& rng, std::size_t n, DType t) {
  WordMatrix m(n, n, zero_word(t));
  for (auto& w : m.flat()) w = Word::from_bits(static_cast<std::uint32_t>(rng()), t);
  return m;
}

unsigned random_masked_bit(CounterRng& rng, const BitMask& mask) {
  const auto k = rng.below(mask.count());
  unsigned seen = 0;
  for (unsigned b = 0; b < 32; ++b)
    if (mask.contains(b) && seen++ == k) return b;
  return 0;
}

void memory_checksums(Verdict& v) {
  const auto t0 = Clock::now();
  CounterRng rng(202);
  const DType types[] = {DType::Int8, DType::Fp32, DType::Bf16};
  const std::size_t sizes[] = {4, 16};
  const int n = 10000;

  int data_ok = 0;
  for (int i = 0; i < n; ++i) {
    const DType t = types[i % 3];
    const std::size_t sz = sizes[(i / 3) % 2];
    GuardedMemory mem(64);
    const auto block = random_block(rng, sz, t);
    mem.mvin(0, block);
    const BitMask mask = mem.mask_for(t);
    auto& w = mem.raw_data(0).flat()[rng.below(sz * sz)];
    w = flip_bit(w, random_masked_bit(rng, mask));
    const auto out = mem.verify_and_correct(0);
    data_ok += out.status == VerifyStatus::Corrected && mem.raw_data(0) == block;
  }

  int gp_untouched = 0, gp_flagged = 0;
  for (int i = 0; i < n; ++i) {
    const DType t = types[i % 3];
    const std::size_t sz = sizes[(i / 3) % 2];
    GuardedMemory mem(64);
    const auto block = random_block(rng, sz, t);
    mem.mvin(0, block);
    const unsigned width = mem.stored_checksums(0).width;
    const Axis axis = rng.below(2) ? Axis::Row : Axis::Col;
    mem.guardpad_entry(0, axis, rng.below(sz)) ^= 1u << rng.below(width);
    const auto out = mem.verify_and_correct(0);
    gp_untouched += mem.raw_data(0) == block;
    gp_flagged += out.status == VerifyStatus::ChecksumRepaired || out.status == VerifyStatus::Uncorrectable;
  }

  int false_pos = 0;
  for (int i = 0; i < n; ++i) {
    GuardedMemory mem(64);
    mem.mvin(0, random_block(rng, sizes[i % 2], types[i % 3]));
    false_pos += mem.verify_and_correct(0).status != VerifyStatus::Clean;
  }
  const double secs = seconds_since(t0);
  v.detail << " masked flips corrected " << data_ok << "/" << n << ", guardpad flips with data untouched "
           << gp_untouched << "/" << n << " (flagged " << gp_flagged << "), clean false positives " << false_pos
           << ", " << secs << " s";
  v.require(data_ok == n, "masked corrections");
  v.require(gp_untouched == n && gp_flagged == n, "guardpad path");
  v.require(false_pos == 0, "false positives");
  v.require(secs < 30.0, "runtime");
}

// -- 3 ----------------------------------------------------------------------

void abft_equivalence(Verdict& v) {
  CounterRng rng(303);
  std::uint64_t int_checks = 0, int_exact = 0;
  double worst_rel = 0.0;
  for (std::size_t n : {2u, 4u, 8u, 16u}) {
    for (int trial = 0; trial < 1000; ++trial) {
      WordMatrix a(n, n, zero_word(DType::Int8)), b(n, n, zero_word(DType::Int8)), d(n, n, zero_word(DType::Int32));
      std::vector<std::int64_t> av(n * n), bv(n * n), dv(n * n);
      for (std::size_t i = 0; i < n * n; ++i) {
        av[i] = static_cast<std::int64_t>(rng.below(256)) - 128;
        bv[i] = static_cast<std::int64_t>(rng.below(256)) - 128;
        dv[i] = static_cast<std::int64_t>(rng.below(2000001)) - 1000000;
        a.flat()[i] = encode_word(static_cast<double>(av[i]), DType::Int8);
        b.flat()[i] = encode_word(static_cast<double>(bv[i]), DType::Int8);
        d.flat()[i] = encode_word(static_cast<double>(dv[i]), DType::Int32);
      }
      // Brute force in 64-bit integers.
      std::vector<std::int64_t> rs(n, 0), cs(n, 0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          std::int64_t c = dv[i * n + j];
          for (std::size_t k = 0; k < n; ++k) c += av[i * n + k] * bv[k * n + j];
          rs[i] += c;
          cs[j] += c;
        }
      const auto s = shield_checksums(a, b, numeric_row_sums(d), numeric_col_sums(d));
      for (std::size_t i = 0; i < n; ++i) {
        int_checks += 2;
        int_exact += decode_word(s.row_check[i]) == static_cast<double>(rs[i]);
        int_exact += decode_word(s.col_check[i]) == static_cast<double>(cs[i]);
      }
    }
    for (DType t : {DType::Fp32, DType::Bf16}) {
      for (int trial = 0; trial < 250; ++trial) {
        WordMatrix a(n, n, zero_word(t)), b(n, n, zero_word(t)), d(n, n, zero_word(DType::Fp32));
        for (auto& w : a.flat()) w = encode_word(rng.normal(), t);
        for (auto& w : b.flat()) w = encode_word(rng.normal(), t);
        for (auto& w : d.flat()) w = encode_word(rng.normal(), DType::Fp32);
        std::vector<long double> rs(n, 0), cs(n, 0), rabs(n, 0), cabs(n, 0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            long double c = decode_word(d(i, j));
            for (std::size_t k = 0; k < n; ++k)
              c += static_cast<long double>(decode_word(a(i, k))) * decode_word(b(k, j));
            rs[i] += c;
            cs[j] += c;
            rabs[i] += std::fabs(c);
            cabs[j] += std::fabs(c);
          }
        const auto s = shield_checksums(a, b, numeric_row_sums(d), numeric_col_sums(d));
        for (std::size_t i = 0; i < n; ++i) {
          const double er = static_cast<double>(std::fabs(decode_word(s.row_check[i]) - rs[i]) /
                                                std::max<long double>(rabs[i], 1.0L));
          const double ec = static_cast<double>(std::fabs(decode_word(s.col_check[i]) - cs[i]) /
                                                std::max<long double>(cabs[i], 1.0L));
          worst_rel = std::max({worst_rel, er, ec});
        }
      }
    }
  }
  v.detail << " int8 exact " << int_exact << "/" << int_checks << ", worst float relative error " << worst_rel
           << " (scaled by the line magnitude)";
  v.require(int_exact == int_checks, "int8 exactness");
  v.require(worst_rel <= 1e-4, "float tolerance");
}

// -- 4 ----------------------------------------------------------------------

void shield_sizing(Verdict& v) {
  const auto a = configure_shields({16, 1, Dataflow::WS});
  const auto b = configure_shields({32, 4, Dataflow::WS});
  v.detail << " (16,1): K=" << a.shields << " sigma=" << a.sigma << " L=" << a.array_window << "; (32,4): K="
           << b.shields << " sigma=" << b.sigma << " L=" << b.array_window;
  v.require(a.shields == 1 && a.sigma == 37 && a.array_window == 47, "(16,1)");
  v.require(b.shields == 2 && b.sigma == 130 && b.array_window == 191, "(32,4)");
  int grid = 0, holds = 0;
  for (unsigned i = 1; i <= 64; ++i)
    for (unsigned j = 1; j <= 16 && i * j <= 4096; ++j) {
      ShieldConfig s;
      try {
        s = configure_shields({i, j, Dataflow::WS});
      } catch (const ConfigurationError&) {
        continue;
      }
      ++grid;
      holds += s.sigma <= s.array_window;
    }
  v.detail << "; sigma <= L_SA on " << holds << "/" << grid << " grid points";
  v.require(holds == grid && grid > 0, "grid property");
}

// -- 5 ----------------------------------------------------------------------

void slowdown_envelope(Verdict& v) {
  const ShieldConfig geos[] = {configure_shields({16, 1, Dataflow::WS}), configure_shields({32, 4, Dataflow::WS})};
  double worst = 0.0;
  std::uint64_t worst_groups = 0;
  for (const auto& g : geos)
    for (std::uint64_t n = 8; n <= 4096; ++n) {
      const double s = pipeline_schedule(n, g).slowdown;
      if (s > worst) {
        worst = s;
        worst_groups = n;
      }
    }
  const double s8a = pipeline_schedule(8, geos[0]).slowdown, s8b = pipeline_schedule(8, geos[1]).slowdown;
  const double limit_a = pipeline_schedule(1000000, geos[0]).slowdown;
  const double limit_b = pipeline_schedule(1000000, geos[1]).slowdown;
  const double gmean = std::sqrt(pipeline_schedule(32, geos[0]).slowdown * pipeline_schedule(32, geos[1]).slowdown);
  std::uint64_t first_ok = 8;
  while (pipeline_schedule(first_ok, geos[0]).slowdown > 1.07 || pipeline_schedule(first_ok, geos[1]).slowdown > 1.07)
    ++first_ok;
  v.detail << " N_g=8: " << s8a << " / " << s8b << "; worst over N_g>=8 " << worst << " at N_g=" << worst_groups
           << "; envelope holds from N_g=" << first_ok << "; N_g=1e6: " << limit_a << " / " << limit_b
           << "; geometric mean at N_g=32: " << gmean;
  v.require(worst <= 1.07, "slowdown <= 1.07 for every N_g >= 8");
  v.require(limit_a < 1.001 && limit_b < 1.001, "asymptote");
  v.require(gmean >= 1.0 && gmean <= 1.07, "geometric mean at N_g=32");
}

// -- 6 and 9 ------------------------------------------------------------------

CampaignConfig coverage_config() {
  CampaignConfig c;
  c.geometry = {16, 1, Dataflow::WS};
  c.workload.kind = WorkloadKind::TinyMlp;
  c.workload.dtype = DType::Int8;
  c.faults.rates = {1e-5, 1e-4, 1e-3, 1e-2};
  c.trials = 1000;
  c.seed = 1;
  return c;
}

std::string coverage_json;

void coverage_trends(Verdict& v) {
  const auto t0 = Clock::now();
  const CampaignRun run = run_campaign(coverage_config());
  const double secs = seconds_since(t0);
  coverage_json = to_json(run.report).dump(2);
  std::uint64_t cons = 0, det = 0, cor = 0;
  for (const auto& r : run.report.rates)
    if (r.rate <= 1e-4) {
      cons += r.totals.consequential;
      det += r.totals.detected;
      cor += r.totals.corrected;
    }
  const double dc = det ? static_cast<double>(det) / static_cast<double>(cons) : 0.0;
  const double cc = det ? static_cast<double>(cor) / static_cast<double>(det) : 0.0;
  v.detail << " rates<=1e-4: " << cons << " consequential, detection " << dc << ", correction " << cc << ";";
  bool det_mono = true, cor_mono = true;
  double prev_d = 2.0, prev_c = 2.0;
  for (const auto& r : run.report.rates) {
    const double d = r.detection_coverage.value_or(NAN), c = r.correction_coverage.value_or(NAN);
    v.detail << " [" << r.rate << ": det " << d << " corr " << c << "]";
    det_mono = det_mono && d <= prev_d;
    cor_mono = cor_mono && c <= prev_c;
    prev_d = d;
    prev_c = c;
  }
  v.detail << "; " << secs << " s";
  v.require(cons >= 1000, "at least 1000 consequential faults");
  v.require(dc >= 0.99, "detection coverage");
  v.require(cc >= 0.95, "correction coverage");
  v.require(det_mono, "detection coverage non-increasing in rate");
  v.require(cor_mono, "correction coverage non-increasing in rate");
  v.require(secs < 300.0, "runtime");
}

void determinism(Verdict& v) {
  const std::string again = to_json(run_campaign(coverage_config()).report).dump(2);
  CampaignConfig os;
  os.geometry = {4, 2, Dataflow::OS};
  os.workload.kind = WorkloadKind::SingleGemm;
  os.workload.dtype = DType::Fp32;
  os.trials = 200;
  const std::string a = to_json(run_campaign(os).report).dump(2);
  const std::string b = to_json(run_campaign(os).report).dump(2);
  v.detail << " tiny_mlp report " << coverage_json.size() << " bytes "
           << (again == coverage_json ? "identical" : "DIFFERENT") << "; fp32 OS gemm report "
           << (a == b ? "identical" : "DIFFERENT");
  v.require(!coverage_json.empty() && again == coverage_json, "tiny_mlp campaign");
  v.require(a == b, "single gemm campaign");
}

// -- 7 ----------------------------------------------------------------------

void detection_latency(Verdict& v) {
  for (const ArrayGeometry g : {ArrayGeometry{16, 1, Dataflow::WS}, ArrayGeometry{32, 4, Dataflow::WS}}) {
    const auto s = configure_shields(g);
    const std::size_t n = g.dim();
    const auto lat = modeled_latency(s, n, n, n);
    std::uint64_t worst = 0;
    Component top = Component::Memory;
    v.detail << " (" << g.tiles_per_row << "," << g.pes_per_tile << "):";
    for (const auto& [c, cycles] : lat) {
      v.detail << " " << to_string(c) << "=" << cycles;
      if (cycles > worst) {
        worst = cycles;
        top = c;
      }
      v.require(cycles <= 500, to_string(c) + " within 500 cycles");
    }
    v.detail << ";";
    v.require(top == Component::Array, "array path largest");
  }
}

// -- 8 ----------------------------------------------------------------------

void sensitivity(Verdict& v) {
  SensitivityConfig cfg;
  cfg.classes = {BitClass::Mantissa, BitClass::SignExponent};
  cfg.rates = {0.0, 1e-5};
  const auto t0 = Clock::now();
  const auto rep = sensitivity_sweep(cfg);
  double mant = NAN, signexp = NAN;
  bool zero_exact = true;
  for (const auto& c : rep.cells) {
    if (c.rate == 0.0) zero_exact = zero_exact && c.accuracy == rep.baseline_accuracy;
    if (c.rate == 1e-5 && c.bit_class == BitClass::Mantissa) mant = c.drop_points;
    if (c.rate == 1e-5 && c.bit_class == BitClass::SignExponent) signexp = c.drop_points;
  }
  v.detail << " baseline " << rep.baseline_accuracy << "; at 1e-5 mantissa change " << mant
           << " points, sign/exponent drop " << signexp << " points; rate-0 column "
           << (zero_exact ? "equals" : "differs from") << " baseline; " << seconds_since(t0) << " s";
  v.require(std::abs(mant) < 1.0, "mantissa within 1 point");
  v.require(signexp >= 10.0, "sign/exponent drop");
  v.require(zero_exact, "rate zero");
}

// -- 10 ---------------------------------------------------------------------

void decoupling(Verdict& v) {
  std::vector<CampaignConfig> cfgs;
  for (DType t : {DType::Int8, DType::Fp32, DType::Bf16}) {
    CampaignConfig c;
    c.workload.dtype = t;
    cfgs.push_back(c);
  }
  for (Dataflow d : {Dataflow::WS, Dataflow::OS})
    for (DType t : {DType::Int8, DType::Fp32, DType::Bf16}) {
      CampaignConfig c;
      c.geometry = {32, 4, d};
      c.workload.kind = WorkloadKind::SingleGemm;
      c.workload.dtype = t;
      cfgs.push_back(c);
    }
  std::size_t runs = 0, identical = 0, quiet = 0;
  for (const auto& c : cfgs) {
    const auto wl = prepare_workload(c);
    for (std::size_t b = 0; b < wl.batches.size(); ++b) {
      const auto p = run_trial(wl, FaultPlan{}, true, b);
      const auto u = run_trial(wl, FaultPlan{}, false, b);
      ++runs;
      identical += p.output == u.output;
      quiet += p.events.empty();
    }
  }
  v.detail << " " << identical << "/" << runs << " fault-free protected outputs bit-identical, " << quiet << "/"
           << runs << " without events";
  v.require(identical == runs, "bit-identical outputs");
  v.require(quiet == runs, "no events");
}

}  // namespace

int main() {
  run("C1", "ECC exhaustive correctness", ecc_exhaustive);
  run("C2", "memory checksum correction", memory_checksums);
  run("C3", "ABFT oracle equivalence", abft_equivalence);
  run("C4", "shield sizing", shield_sizing);
  run("C5", "slowdown envelope", slowdown_envelope);
  run("C6", "coverage trends", coverage_trends);
  run("C7", "detection latency", detection_latency);
  run("C8", "bit-position sensitivity", sensitivity);
  run("C9", "determinism", determinism);
  run("C10", "decoupling", decoupling);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
