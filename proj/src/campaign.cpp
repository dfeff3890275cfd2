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

#include "npuguard/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "npuguard/rng.hpp"

namespace npuguard {

std::string to_string(WorkloadKind k) { return k == WorkloadKind::SingleGemm ? "single_gemm" : "tiny_mlp"; }

WorkloadKind parse_workload_kind(std::string_view s) {
  if (s == "single_gemm") return WorkloadKind::SingleGemm;
  if (s == "tiny_mlp") return WorkloadKind::TinyMlp;
  throw ConfigurationError("unknown workload kind: " + std::string(s));
}

std::string to_string(Component c) {
  switch (c) {
    case Component::Memory: return "memory";
    case Component::Array: return "array";
    case Component::Register: return "register";
    case Component::Nonlinear: return "nonlinear";
  }
  return "?";
}

double FaultConfig::weight(SiteKind k) const {
  const auto it = site_weights.find(k);
  if (it != site_weights.end()) return it->second;
  return k == SiteKind::MvinStream ? 0.0 : 1.0;
}

void CampaignConfig::validate() const {
  configure_shields(geometry);
  if (trials == 0) throw ConfigurationError("trials must be at least 1");
  if (workload.dtype == DType::Int32) throw ConfigurationError("int32 is an accumulator type, not a workload type");
  if (workload.kind == WorkloadKind::TinyMlp) {
    if (workload.layers.size() < 2) throw ConfigurationError("tiny_mlp needs at least two layer widths");
    if (workload.layers.front() != workload.blobs.features || workload.layers.back() != workload.blobs.classes)
      throw ConfigurationError("tiny_mlp widths must start at the feature count and end at the class count");
    if (workload.batch == 0 || workload.test_samples < workload.batch)
      throw ConfigurationError("tiny_mlp needs batch >= 1 and test_samples >= batch");
    if (workload.train_samples == 0) throw ConfigurationError("tiny_mlp needs training samples");
  } else if (workload.gemm_groups == 0) {
    throw ConfigurationError("single_gemm needs at least one group");
  }
  if (protection.redundant_copies < 1 || protection.redundant_copies > 3)
    throw ConfigurationError("redundant_copies must be 1, 2 or 3");
  for (const double r : faults.rates)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigurationError("fault rates must lie in [0, 1]");
  for (const auto& [k, w] : faults.site_weights)
    if (!(w >= 0.0)) throw ConfigurationError("site weights must be non-negative");
  if (!(frequency_mhz > 0.0)) throw ConfigurationError("frequency must be positive");
}

namespace {

constexpr char kSep = '|';

std::string part(const std::string& unit, const char* p) { return unit + kSep + p; }

std::string unit_key(const TransientEvent& e) {
  // Stream faults corrupt data before any checksum exists, so they form
  // their own unit instead of joining the resident block's.
  if (e.kind == SiteKind::MvinStream) return e.target;
  return e.target.substr(0, e.target.find(kSep));
}

std::string idx(const char* prefix, std::size_t v) { return prefix + std::to_string(v); }

std::string weight_name(std::size_t l, std::size_t k, std::size_t n) {
  return "w/l" + std::to_string(l) + "/k" + std::to_string(k) + "n" + std::to_string(n);
}
std::string bias_name(std::size_t l, std::size_t n) { return "b/l" + std::to_string(l) + "/n" + std::to_string(n); }
std::string input_name(std::size_t l, std::size_t m, std::size_t k) {
  return "x/l" + std::to_string(l) + "/m" + std::to_string(m) + "k" + std::to_string(k);
}
std::string group_suffix(std::size_t l, std::size_t m, std::size_t n, std::size_t k) {
  return "l" + std::to_string(l) + "/m" + std::to_string(m) + "n" + std::to_string(n) + "k" + std::to_string(k);
}
std::string relu_name(std::size_t l, std::size_t m, std::size_t n) {
  return "relu/l" + std::to_string(l) + "/m" + std::to_string(m) + "n" + std::to_string(n);
}
std::string reg_name(std::size_t l) { return "reg/l" + std::to_string(l); }

Word float_word(float v, DType t) {
  if (t == DType::Bf16) return Word{bf16_bits(v), DType::Bf16};
  return Word{std::bit_cast<std::uint32_t>(v), DType::Fp32};
}

float word_float(Word w) { return static_cast<float>(decode_word(w)); }

std::size_t pad_to(std::size_t x, std::size_t n) { return (x + n - 1) / n * n; }

unsigned ceil_log2(std::size_t x) { return x <= 1 ? 0 : static_cast<unsigned>(std::bit_width(x - 1)); }

}  // namespace

std::map<Component, std::uint64_t> modeled_latency(const ShieldConfig& shield, std::size_t block_rows,
                                                   std::size_t block_cols, std::size_t vector_len) {
  const TimingReport t = pipeline_schedule(1, shield);
  return {
      {Component::Memory, block_rows + ceil_log2(block_cols) + 1},
      {Component::Array, t.worst_detection_latency_cycles},
      {Component::Register, 2},
      {Component::Nonlinear, vector_len + ceil_log2(vector_len) + 2},
  };
}

// -- workload preparation --------------------------------------------------------

PreparedWorkload prepare_workload(const CampaignConfig& cfg) {
  cfg.validate();
  PreparedWorkload wl;
  wl.config = cfg;
  wl.shield = configure_shields(cfg.geometry);
  wl.n = cfg.geometry.dim();
  const std::size_t n = wl.n;
  const DType t = cfg.workload.dtype;
  const DType acc_t = accumulator_dtype(t);

  auto make_layer = [&](std::size_t in, std::size_t out) {
    PreparedLayer pl;
    pl.in = in;
    pl.out = out;
    pl.w = WordMatrix(pad_to(in, n), pad_to(out, n), zero_word(t));
    pl.bias.assign(pad_to(out, n), zero_word(acc_t));
    return pl;
  };

  if (cfg.workload.kind == WorkloadKind::TinyMlp) {
    const auto& w = cfg.workload;
    const Dataset train = make_blobs(w.blobs, 0, w.train_samples);
    const Dataset test = make_blobs(w.blobs, 1, w.test_samples);
    const Mlp m = train_mlp(train, w.layers, w.train);
    wl.float_accuracy = mlp_accuracy(m, test);
    std::optional<QuantMlp> q;
    if (t == DType::Int8) {
      q = quantize_mlp(m, train);
      wl.reference_accuracy = quant_accuracy(*q, test);
    }
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      const auto& src = m.layers[l];
      PreparedLayer pl = make_layer(src.in(), src.out());
      pl.relu = l + 1 < m.layers.size();
      for (std::size_t k = 0; k < src.in(); ++k)
        for (std::size_t j = 0; j < src.out(); ++j)
          pl.w(k, j) = q ? encode_word(q->layers[l].w(k, j), t) : float_word(src.w(k, j), t);
      for (std::size_t j = 0; j < src.out(); ++j)
        pl.bias[j] = q ? Word{static_cast<std::uint32_t>(q->layers[l].b[j]), DType::Int32}
                       : Word{std::bit_cast<std::uint32_t>(src.b[j]), DType::Fp32};
      pl.multiplier = q ? q->layers[l].multiplier : 1.0f;
      wl.layers.push_back(std::move(pl));
    }
    wl.batch_rows = w.batch;
    const std::size_t batches = w.test_samples / w.batch;
    for (std::size_t b = 0; b < batches; ++b) {
      WordMatrix x(pad_to(w.batch, n), pad_to(w.layers.front(), n), zero_word(t));
      std::vector<std::uint32_t> labels;
      for (std::size_t r = 0; r < w.batch; ++r) {
        const std::size_t s = b * w.batch + r;
        const auto row = test.x.row(s);
        if (q) {
          const auto qx = quantize_input(row, q->input_scale);
          for (std::size_t c = 0; c < row.size(); ++c) x(r, c) = encode_word(qx[c], t);
        } else {
          for (std::size_t c = 0; c < row.size(); ++c) x(r, c) = float_word(row[c], t);
        }
        labels.push_back(test.labels[s]);
      }
      wl.batches.push_back(std::move(x));
      wl.labels.push_back(std::move(labels));
    }
    wl.softmax_head = true;
    wl.classes = w.layers.back();
  } else {
    CounterRng rng(cfg.workload.gemm_seed, 0x6E);
    auto random_input = [&]() {
      if (t == DType::Int8) return encode_word(static_cast<double>(rng.below(256)) - 128.0, t);
      return float_word(static_cast<float>(rng.normal()), t);
    };
    PreparedLayer pl = make_layer(cfg.workload.gemm_groups * n, n);
    pl.uses_scale = false;
    for (auto& v : pl.w.flat()) v = random_input();
    for (auto& v : pl.bias)
      v = acc_t == DType::Int32 ? Word{static_cast<std::uint32_t>(static_cast<std::int32_t>(rng.below(2001)) - 1000),
                                       DType::Int32}
                                : float_word(static_cast<float>(rng.normal()), DType::Fp32);
    wl.layers.push_back(std::move(pl));
    WordMatrix x(n, cfg.workload.gemm_groups * n, zero_word(t));
    for (auto& v : x.flat()) v = random_input();
    wl.batches.push_back(std::move(x));
    wl.labels.emplace_back();
    wl.batch_rows = n;
  }

  // Original input bits: data, weights and biases at their real sizes.
  const unsigned in_bits = bit_width(t);
  const unsigned acc_bits = bit_width(acc_t);
  wl.input_bits = static_cast<std::uint64_t>(wl.batch_rows) * wl.layers.front().in * in_bits;
  for (const auto& l : wl.layers)
    wl.input_bits += static_cast<std::uint64_t>(l.in) * l.out * in_bits + static_cast<std::uint64_t>(l.out) * acc_bits;

  // Exposure sites, in schedule order.
  const auto& fc = cfg.faults;
  auto add = [&](SiteKind k, std::string target, std::uint64_t words, unsigned bits, double scale = 1.0) {
    wl.sites.push_back({k, std::move(target), words, bits, fc.weight(k) * scale});
  };
  auto add_block = [&](const std::string& name, std::size_t rows, std::size_t cols, unsigned bits, bool writeback) {
    if (writeback)
      add(SiteKind::Writeback, part(name, "wb"), rows * cols, bits);
    else
      add(SiteKind::MvinStream, part(name, "mvin"), rows * cols, bits);
    add(SiteKind::MemoryResidency, part(name, "data"), rows * cols, bits);
    add(SiteKind::GuardpadCell, part(name, "gp"), rows + cols, bits);
  };
  const std::size_t rows_pad = wl.batches.front().rows();
  const std::size_t mt = rows_pad / n;
  for (std::size_t l = 0; l < wl.layers.size(); ++l) {
    const auto& pl = wl.layers[l];
    const std::size_t kt = pl.w.rows() / n, nt = pl.w.cols() / n;
    for (std::size_t k = 0; k < kt; ++k)
      for (std::size_t j = 0; j < nt; ++j) add_block(weight_name(l, k, j), n, n, in_bits, false);
    for (std::size_t j = 0; j < nt; ++j) add_block(bias_name(l, j), n, n, acc_bits, false);
    if (l == 0)
      for (std::size_t m = 0; m < mt; ++m)
        for (std::size_t k = 0; k < kt; ++k) add_block(input_name(0, m, k), n, n, in_bits, false);
    if (pl.uses_scale) add(SiteKind::RegisterBit, part(reg_name(l), "cw"), 1, 32 + ecc::check_width(32));
    for (std::size_t m = 0; m < mt; ++m)
      for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t k = 0; k < kt; ++k) {
          const std::string g = "g/" + group_suffix(l, m, j, k);
          add(SiteKind::ArrayInput, part(g, "A"), n * n, in_bits);
          add(SiteKind::ArrayInput, part(g, "B"), n * n, in_bits);
          add(SiteKind::ArrayInput, part(g, "D"), n * n, acc_bits);
          // One accumulator per PE; the N^3 (i,k,j) slots share its exposure.
          add(SiteKind::PEPartialSum, part(g, "psum"), static_cast<std::uint64_t>(n) * n * n, acc_bits,
              1.0 / static_cast<double>(n));
          add_block("a/" + group_suffix(l, m, j, k), n, n, acc_bits, true);
          ++wl.groups_per_trial;
        }
        if (pl.relu) {
          add(SiteKind::NonlinearOutput, part(relu_name(l, m, j), "out"), n * n, in_bits);
          add_block(input_name(l + 1, m, j), n, n, in_bits, false);
        }
      }
  }
  if (wl.softmax_head)
    for (std::size_t m = 0; m < mt; ++m) {
      const std::size_t rows = std::min(n, wl.batch_rows - std::min(wl.batch_rows, m * n));
      add(SiteKind::NonlinearOutput, part(idx("sm/m", m), "out"), rows * wl.classes, 32);
    }
  // Permanent-only sites for PE registers, addressed by pe_row * N + pe_col.
  wl.sites.push_back({SiteKind::PEPartialSum, "array|psum", static_cast<std::uint64_t>(n) * n, acc_bits, 0.0});
  wl.sites.push_back({SiteKind::PEPartialSum, "array|fwd", static_cast<std::uint64_t>(n) * n, in_bits, 0.0});
  wl.sites.push_back({SiteKind::PEPartialSum, "array|weight", static_cast<std::uint64_t>(n) * n, in_bits, 0.0});

  for (const auto& p : fc.permanents) {
    const auto it = std::find_if(wl.sites.begin(), wl.sites.end(),
                                 [&](const ExposureSite& s) { return s.kind == p.kind && s.target == p.target; });
    if (it == wl.sites.end()) throw ConfigurationError("permanent fault names an unknown site: " + p.target);
    plan_permanent(*it, p.word, p.bit, p.value);  // validates coordinates
  }
  return wl;
}

FaultPlan plan_for_trial(const PreparedWorkload& wl, double rate, std::size_t rate_index, std::uint64_t trial) {
  const std::uint64_t seed = mix64(wl.config.seed ^ ((rate_index + 1) * CounterRng::kGamma));
  FaultPlan plan = plan_transient(rate, wl.input_bits, wl.sites, seed, trial, 1);
  plan.permanents = wl.config.faults.permanents;
  return plan;
}

// -- one trial -----------------------------------------------------------------

namespace {

class TrialRunner {
 public:
  TrialRunner(const PreparedWorkload& wl, const FaultPlan& plan, bool protect, std::uint64_t trial)
      : wl_(wl),
        plan_(plan),
        prot_(wl.config.protection),
        protect_(protect),
        n_(wl.n),
        t_(wl.config.workload.dtype),
        acc_t_(accumulator_dtype(wl.config.workload.dtype)),
        spad_(std::size_t{1} << 28, wl.config.protection.mask),
        acc_(std::size_t{1} << 28, wl.config.protection.mask),
        timing_(pipeline_schedule(1, wl.shield)),
        in_mask_(plan.transients.size(), 1) {
    result_.trial = trial;
    result_.batch = trial % wl.batches.size();
    for (std::size_t i = 0; i < plan.transients.size(); ++i) events_[plan.transients[i].target].push_back(i);
    for (std::size_t i = 0; i < plan.permanents.size(); ++i) stuck_[plan.permanents[i].target].push_back(i);
    for (const auto& [target, reg] : {std::pair{"array|psum", PeRegister::PartialSum},
                                      std::pair{"array|fwd", PeRegister::ForwardedInput},
                                      std::pair{"array|weight", PeRegister::Weight}})
      for (const std::size_t i : stuck_list(target)) {
        const auto& f = plan.permanents[i];
        array_stuck_.push_back({static_cast<std::uint32_t>(f.word / n_), static_cast<std::uint32_t>(f.word % n_), reg,
                                f.bit, f.value});
      }
  }

  TrialResult run() {
    const bool shielded = protect_ && prot_.array;
    cycle_ = shielded ? timing_.s1_cycles : 0;
    const std::size_t b = result_.batch;
    const WordMatrix& x = wl_.batches[b];
    const std::size_t mt = x.rows() / n_;

    for (std::size_t l = 0; l < wl_.layers.size(); ++l) {
      const auto& pl = wl_.layers[l];
      if (pl.uses_scale) setup_register(l, pl.multiplier);
      const std::size_t kt = pl.w.rows() / n_, nt = pl.w.cols() / n_;
      for (std::size_t k = 0; k < kt; ++k)
        for (std::size_t j = 0; j < nt; ++j) store(spad_, weight_name(l, k, j), tile(pl.w, k, j), std::nullopt);
      for (std::size_t j = 0; j < nt; ++j) {
        WordMatrix bias(n_, n_, zero_word(acc_t_));
        for (std::size_t r = 0; r < n_; ++r)
          for (std::size_t c = 0; c < n_; ++c) bias(r, c) = pl.bias[j * n_ + c];
        store(acc_, bias_name(l, j), std::move(bias), std::nullopt);
      }
      if (l == 0)
        for (std::size_t m = 0; m < mt; ++m)
          for (std::size_t k = 0; k < kt; ++k) store(spad_, input_name(0, m, k), tile(x, m, k), std::nullopt);
    }

    std::vector<std::vector<float>> logits(mt * n_);
    for (std::size_t l = 0; l < wl_.layers.size(); ++l) {
      const auto& pl = wl_.layers[l];
      const std::size_t kt = pl.w.rows() / n_, nt = pl.w.cols() / n_;
      for (std::size_t m = 0; m < mt; ++m)
        for (std::size_t j = 0; j < nt; ++j) {
          std::string prev = bias_name(l, j);
          for (std::size_t k = 0; k < kt; ++k) {
            const auto a = read(input_name(l, m, k));
            const auto w = read(weight_name(l, k, j));
            const auto d = read(prev);
            const std::string suffix = group_suffix(l, m, j, k);
            WordMatrix c = run_group("g/" + suffix, a.data, w.data, d);
            const ChecksumVectors sums = checksum_generate(c, acc_.mask_for(acc_t_));
            if (prev != bias_name(l, j)) release(prev);
            prev = "a/" + suffix;
            store(acc_, prev, std::move(c), sums);
          }
          const WordMatrix out = read(prev).data;
          release(prev);
          const float scale = pl.uses_scale ? read_register(l, pl.multiplier) : 1.0f;
          if (pl.relu) {
            WordMatrix act = relu_unit(relu_name(l, m, j), requantise(out, scale));
            store(spad_, input_name(l + 1, m, j), std::move(act), std::nullopt);
          } else if (wl_.softmax_head) {
            for (std::size_t r = 0; r < n_; ++r)
              for (std::size_t c = 0; c < n_; ++c)
                logits[m * n_ + r].push_back(dequantise(out(r, c), scale));
          } else {
            for (std::size_t r = 0; r < n_; ++r)
              for (std::size_t c = 0; c < n_; ++c) gemm_out_.push_back({m * n_ + r, j * n_ + c, out(r, c)});
          }
        }
      for (std::size_t m = 0; m < mt; ++m)
        for (std::size_t k = 0; k < kt; ++k) release(input_name(l, m, k));
      for (std::size_t k = 0; k < kt; ++k)
        for (std::size_t j = 0; j < nt; ++j) release(weight_name(l, k, j));
      for (std::size_t j = 0; j < nt; ++j) release(bias_name(l, j));
    }

    if (wl_.softmax_head) {
      for (std::size_t m = 0; m < mt; ++m) softmax_unit(m, logits);
    } else {
      std::sort(gemm_out_.begin(), gemm_out_.end(),
                [](const auto& p, const auto& q) { return std::tie(p.row, p.col) < std::tie(q.row, q.col); });
      for (const auto& e : gemm_out_)
        if (e.row < wl_.batch_rows) result_.output.push_back(e.value);
    }
    if (shielded) cycle_ += timing_.s4_cycles;
    result_.cycles = cycle_;
    finish();
    return std::move(result_);
  }

 private:
  struct Unit {
    Component component = Component::Memory;
    bool evaluated = false;
    bool consequential = false;
    bool detected = false;
    bool corrected = false;
  };
  struct Block {
    GuardedMemory* mem = nullptr;
    Address addr = 0;
    WordMatrix expected;
    ChecksumVectors expected_sums;
  };
  struct ReadOut {
    WordMatrix data;
    std::optional<ChecksumVectors> sums;
  };
  struct OutCell {
    std::size_t row;
    std::size_t col;
    Word value;
  };

  const std::vector<std::size_t>& event_list(const std::string& target) const {
    static const std::vector<std::size_t> none;
    const auto it = events_.find(target);
    return it == events_.end() ? none : it->second;
  }
  const std::vector<std::size_t>& stuck_list(const std::string& target) const {
    static const std::vector<std::size_t> none;
    const auto it = stuck_.find(target);
    return it == stuck_.end() ? none : it->second;
  }

  WordMatrix tile(const WordMatrix& m, std::size_t tr, std::size_t tc) const {
    WordMatrix out(n_, n_);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t c = 0; c < n_; ++c) out(r, c) = m(tr * n_ + r, tc * n_ + c);
    return out;
  }

  void flip_words(WordMatrix& m, const std::string& target, const BitMask& mask) {
    for (const std::size_t i : event_list(target)) {
      const auto& e = plan_.transients[i];
      Word& w = m(e.word / m.cols(), e.word % m.cols());
      w = flip_bit(w, e.bit);
      in_mask_[i] = mask.contains(e.bit);
    }
  }

  void force_words(WordMatrix& m, const std::string& target) {
    for (const std::size_t i : stuck_list(target)) {
      const auto& f = plan_.permanents[i];
      Word& w = m(f.word / m.cols(), f.word % m.cols());
      const std::uint32_t bit = 1u << f.bit;
      w.bits = f.value ? (w.bits | bit) : (w.bits & ~bit);
    }
  }

  void force_block(const std::string& name, Block& b) {
    force_words(b.mem->raw_data(b.addr), part(name, "data"));
    const std::size_t rows = b.expected.rows();
    for (const std::size_t i : stuck_list(part(name, "gp"))) {
      const auto& f = plan_.permanents[i];
      const bool row = f.word < rows;
      auto& e = b.mem->guardpad_entry(b.addr, row ? Axis::Row : Axis::Col, row ? f.word : f.word - rows);
      const std::uint32_t bit = 1u << f.bit;
      e = f.value ? (e | bit) : (e & ~bit);
    }
  }

  void store(GuardedMemory& mem, const std::string& name, WordMatrix block, std::optional<ChecksumVectors> sums) {
    Block b;
    b.mem = &mem;
    b.addr = next_addr_;
    next_addr_ += static_cast<Address>(block.rows());
    const BitMask mask = mem.mask_for(block(0, 0).dtype);
    if (sums) {
      b.expected = block;
      b.expected_sums = *sums;
      flip_words(block, part(name, "wb"), mask);
      mem.mvin_with_checksums(b.addr, std::move(block), *sums);
    } else {
      const std::string stream = part(name, "mvin");
      if (!event_list(stream).empty()) {
        const WordMatrix clean = block;
        flip_words(block, stream, mask);
        Unit& u = units_[stream];
        u.component = Component::Memory;
        u.evaluated = true;
        u.consequential = !(block == clean);
      }
      mem.mvin(b.addr, std::move(block));
      b.expected = mem.raw_data(b.addr);
      b.expected_sums = mem.stored_checksums(b.addr);
    }
    flip_words(mem.raw_data(b.addr), part(name, "data"), mask);
    const std::size_t rows = b.expected.rows();
    for (const std::size_t i : event_list(part(name, "gp"))) {
      const auto& e = plan_.transients[i];
      const bool row = e.word < rows;
      mem.guardpad_entry(b.addr, row ? Axis::Row : Axis::Col, row ? e.word : e.word - rows) ^= 1u << e.bit;
    }
    force_block(name, b);
    units_[name].component = Component::Memory;
    blocks_[name] = std::move(b);
  }

  bool block_differs(const Block& b) const {
    const WordMatrix& raw = b.mem->raw_data(b.addr);
    const BitMask mask = b.mem->mask_for(raw(0, 0).dtype);
    for (std::size_t i = 0; i < raw.flat().size(); ++i)
      if (mask.apply(raw.flat()[i].bits) != mask.apply(b.expected.flat()[i].bits)) return true;
    return !(b.mem->stored_checksums(b.addr) == b.expected_sums);
  }

  ReadOut read(const std::string& name) {
    Block& b = blocks_.at(name);
    force_block(name, b);
    Unit& u = units_[name];
    const bool first = !u.evaluated;
    if (first) u.consequential = block_differs(b);
    u.evaluated = true;
    if (protect_ && prot_.memory) {
      auto res = b.mem->read(b.addr);
      if (first) {
        u.detected = res.outcome.status != VerifyStatus::Clean;
        u.corrected = u.detected && !block_differs(b);
      }
      if (res.outcome.status != VerifyStatus::Clean)
        event(name, Component::Memory, to_string(res.outcome.status), res.outcome.latency_cycles);
      return {std::move(res.data), std::move(res.sums)};
    }
    return {b.mem->raw_data(b.addr), std::nullopt};
  }

  void release(const std::string& name) {
    const auto it = blocks_.find(name);
    if (it == blocks_.end()) return;
    it->second.mem->release(it->second.addr);
    blocks_.erase(it);
  }

  void event(const std::string& unit, Component c, std::string status, std::uint64_t latency) {
    result_.events.push_back({unit, c, std::move(status), cycle_ + latency, latency});
  }

  // -- registers --

  void setup_register(std::size_t l, float value) {
    const std::string id = reg_name(l);
    regs_.declare(id, 32);
    for (const std::size_t i : stuck_list(part(id, "cw"))) {
      const auto& f = plan_.permanents[i];
      regs_.set_stuck(id, f.bit, f.value);
    }
    regs_.write(id, std::bit_cast<std::uint32_t>(value));
    for (const std::size_t i : event_list(part(id, "cw"))) regs_.inject_flip(id, plan_.transients[i].bit);
    units_[id].component = Component::Register;
  }

  float read_register(std::size_t l, float expected) {
    const std::string id = reg_name(l);
    const std::uint32_t want = std::bit_cast<std::uint32_t>(expected);
    Unit& u = units_[id];
    const bool first = !u.evaluated;
    if (first) u.consequential = !(regs_.raw(id) == ecc::encode(want, 32));
    u.evaluated = true;
    if (protect_ && prot_.registers) {
      const auto r = regs_.read(id);
      if (first) {
        u.detected = r.status != ecc::DecodeStatus::Clean;
        u.corrected = u.detected && r.data == want;
      }
      if (r.status != ecc::DecodeStatus::Clean) event(id, Component::Register, ecc::to_string(r.status), 2);
      return std::bit_cast<float>(static_cast<std::uint32_t>(r.data));
    }
    // Unchecked read: take the data positions of the codeword as they are.
    const auto& cw = regs_.raw(id);
    std::uint32_t v = 0;
    for (unsigned i = 0; i < 32; ++i) v |= static_cast<std::uint32_t>((cw.bits >> ecc::data_position(32, i)) & 1u) << i;
    return std::bit_cast<float>(v);
  }

  // -- array --

  WordMatrix run_group(const std::string& g, const WordMatrix& a, const WordMatrix& b, const ReadOut& d) {
    ArrayFaultSet fs;
    fs.stuck = array_stuck_;
    const BitMask in_mask = protection_mask(t_, prot_.mask);
    const BitMask acc_mask = protection_mask(acc_t_, prot_.mask);
    for (const auto& [suffix, op, mask] : {std::tuple{"A", Operand::A, in_mask}, std::tuple{"B", Operand::B, in_mask},
                                           std::tuple{"D", Operand::D, acc_mask}})
      for (const std::size_t i : event_list(part(g, suffix))) {
        const auto& e = plan_.transients[i];
        ArrayTransient tr;
        tr.kind = ArrayTransient::Kind::Operand;
        tr.operand = op;
        tr.i = static_cast<std::uint32_t>(e.word / n_);
        tr.j = static_cast<std::uint32_t>(e.word % n_);
        tr.bit = e.bit;
        fs.transients.push_back(tr);
        in_mask_[i] = mask.contains(e.bit);
      }
    for (const std::size_t i : event_list(part(g, "psum"))) {
      const auto& e = plan_.transients[i];
      ArrayTransient tr;
      tr.kind = ArrayTransient::Kind::PartialSum;
      tr.i = static_cast<std::uint32_t>(e.word / (n_ * n_));
      tr.k = static_cast<std::uint32_t>((e.word / n_) % n_);
      tr.j = static_cast<std::uint32_t>(e.word % n_);
      tr.bit = e.bit;
      fs.transients.push_back(tr);
      in_mask_[i] = acc_mask.contains(e.bit);
    }

    const ArrayGeometry& geo = wl_.config.geometry;
    WordMatrix c = gemm(a, b, d.data, geo, fs);
    const WordMatrix oracle = fs.empty() ? c : reference_gemm(a, b, d.data);
    Unit& u = units_[g];
    u.component = Component::Array;
    u.evaluated = true;
    u.consequential = !(c == oracle);

    const bool shielded = protect_ && prot_.array;
    if (shielded) {
      std::vector<Word> d_rows, d_cols;
      if (d.sums && acc_t_ == DType::Int32) {
        d_rows = guardpad_sums_as_words(d.sums->row_sums, acc_t_);
        d_cols = guardpad_sums_as_words(d.sums->col_sums, acc_t_);
      } else {
        d_rows = numeric_row_sums(d.data);
        d_cols = numeric_col_sums(d.data);
      }
      const ShieldChecksums checks = shield_checksums(a, b, d_rows, d_cols);
      const ArrayOutcome out = shield_verify(c, checks, wl_.shield, t_, prot_.shield_tolerance);
      u.detected = out.status != ArrayStatus::Clean;
      u.corrected = u.detected && outputs_match(c, oracle);
      if (u.detected) {
        event(g, Component::Array, to_string(out.status), out.detection_latency_cycles);
        log_array(out);
      }
      cycle_ += timing_.s2_cycles + timing_.s3_cycles;
    } else {
      cycle_ += timing_.s2_cycles + wl_.shield.array_window;
    }
    return c;
  }

  bool outputs_match(const WordMatrix& c, const WordMatrix& oracle) const {
    if (c == oracle) return true;
    if (!is_float(t_)) return false;
    const double rel = t_ == DType::Bf16 ? prot_.shield_tolerance.rel_bf16 : prot_.shield_tolerance.rel_fp32;
    for (std::size_t i = 0; i < c.rows(); ++i) {
      double scale = 1.0;
      for (std::size_t j = 0; j < c.cols(); ++j) scale += std::abs(decode_word(oracle(i, j)));
      for (std::size_t j = 0; j < c.cols(); ++j) {
        const double diff = std::abs(decode_word(c(i, j)) - decode_word(oracle(i, j)));
        if (!(diff <= rel * scale)) return false;
      }
    }
    return true;
  }

  void log_array(const ArrayOutcome& out) {
    // The destination block is allocated next.
    const Address dest = next_addr_;
    auto& linker = acc_.linker();
    for (const auto& c : out.corrections)
      linker.log(dest, static_cast<std::int32_t>(c.row), static_cast<std::int32_t>(c.col), ErrorKind::Data,
                 static_cast<std::uint32_t>(static_cast<std::int64_t>(c.delta)));
    if (out.tile) linker.log(dest, out.tile->row, out.tile->col, ErrorKind::Tile, 0);
    if (out.status == ArrayStatus::Uncorrectable) linker.log(dest, -1, -1, ErrorKind::Uncorrectable, 0);
  }

  // -- nonlinear --

  WordMatrix requantise(const WordMatrix& acc, float scale) const {
    WordMatrix out(acc.rows(), acc.cols(), zero_word(t_));
    for (std::size_t i = 0; i < acc.flat().size(); ++i) {
      const Word w = acc.flat()[i];
      if (t_ == DType::Int8) {
        const float v = static_cast<float>(static_cast<std::int32_t>(w.bits)) * scale;
        out.flat()[i] = Word{static_cast<std::uint8_t>(saturate_int8(v)), DType::Int8};
      } else {
        out.flat()[i] = float_word(word_float(w) * scale, t_);
      }
    }
    return out;
  }

  float dequantise(Word w, float scale) const {
    if (w.dtype == DType::Int32) return static_cast<float>(static_cast<std::int32_t>(w.bits)) * scale;
    return word_float(w) * scale;
  }

  WordMatrix relu_unit(const std::string& name, WordMatrix x) {
    const RedundantOp op{RedundantOpKind::ReLU, 2};
    std::vector<NonlinearFlip> flips;
    const BitMask mask = protection_mask(t_, prot_.mask);
    for (const std::size_t i : event_list(part(name, "out"))) {
      const auto& e = plan_.transients[i];
      flips.push_back({0, static_cast<std::size_t>(e.word), e.bit});
      in_mask_[i] = mask.contains(e.bit);
    }
    const std::vector<Word> in(x.flat().begin(), x.flat().end());
    const std::vector<Word> oracle = apply_op(op, in);
    const GuardedResult raw = redundant_apply(op, in, 1, flips);
    Unit& u = units_[name];
    u.component = Component::Nonlinear;
    u.evaluated = true;
    u.consequential = raw.output != oracle;
    std::vector<Word> result = raw.output;
    if (protect_ && prot_.nonlinear) {
      const GuardedResult res = redundant_apply(op, in, prot_.redundant_copies, flips);
      u.detected = !res.votes.empty();
      u.corrected = u.detected && res.output == oracle;
      if (u.detected) event(name, Component::Nonlinear, res.passed() ? "voted" : "mismatch", 2);
      result = res.output;
    }
    std::copy(result.begin(), result.end(), x.flat().begin());
    return x;
  }

  void softmax_unit(std::size_t m, const std::vector<std::vector<float>>& logits) {
    const std::string name = idx("sm/m", m);
    const std::size_t classes = wl_.classes;
    const std::size_t first = m * n_;
    const std::size_t rows = std::min(n_, wl_.batch_rows - std::min(wl_.batch_rows, first));
    std::vector<std::vector<NonlinearFlip>> flips(rows);
    const BitMask mask = protection_mask(DType::Fp32, prot_.mask);
    for (const std::size_t i : event_list(part(name, "out"))) {
      const auto& e = plan_.transients[i];
      flips[e.word / classes].push_back({0, static_cast<std::size_t>(e.word % classes), e.bit});
      in_mask_[i] = mask.contains(e.bit);
    }
    Unit& u = units_[name];
    u.component = Component::Nonlinear;
    u.evaluated = true;
    bool all_match = true;
    bool failed = false;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<Word> row;
      for (std::size_t c = 0; c < classes; ++c) row.push_back(float_word(logits[first + r][c], DType::Fp32));
      const GuardedResult res = softmax_guarded(row, flips[r], prot_.nonlinear_tolerance);
      if (!flips[r].empty()) {
        const GuardedResult clean = softmax_guarded(row, {}, prot_.nonlinear_tolerance);
        if (res.output != clean.output) all_match = false;
      }
      if (!res.passed()) failed = true;
      std::vector<float> probs;
      for (const auto& w : res.output) {
        result_.output.push_back(w);
        probs.push_back(word_float(w));
      }
      ++result_.samples;
      if (argmax(probs) == wl_.labels[result_.batch][first + r]) ++result_.correct;
    }
    u.consequential = !all_match;
    if (protect_ && prot_.nonlinear) {
      u.detected = failed;
      u.corrected = failed && all_match;
      if (failed) event(name, Component::Nonlinear, "invariant_fail", classes + ceil_log2(classes) + 2);
    }
  }

  void finish() {
    for (std::size_t i = 0; i < plan_.transients.size(); ++i) {
      const auto& e = plan_.transients[i];
      FaultOutcome o;
      o.kind = e.kind;
      o.target = e.target;
      const auto it = units_.find(unit_key(e));
      if (it != units_.end()) {
        const Unit& u = it->second;
        o.component = u.component;
        o.consequential = u.evaluated && u.consequential && in_mask_[i];
        o.detected = u.detected;
        o.corrected = u.corrected;
      }
      result_.faults.push_back(std::move(o));
    }
    ErrorLog log = spad_.mvout_error_block();
    ErrorLog acc_log = acc_.mvout_error_block();
    log.insert(log.end(), acc_log.begin(), acc_log.end());
    std::sort(log.begin(), log.end(), [](const ErrorRecord& a, const ErrorRecord& b) {
      return std::tie(a.address, a.row, a.col_or_tile, a.kind) < std::tie(b.address, b.row, b.col_or_tile, b.kind);
    });
    result_.error_log = std::move(log);
  }

  const PreparedWorkload& wl_;
  const FaultPlan& plan_;
  const ProtectionConfig& prot_;
  bool protect_;
  std::size_t n_;
  DType t_;
  DType acc_t_;
  GuardedMemory spad_;
  GuardedMemory acc_;
  ecc::RegisterFile regs_;
  TimingReport timing_;
  std::unordered_map<std::string, std::vector<std::size_t>> events_;
  std::unordered_map<std::string, std::vector<std::size_t>> stuck_;
  std::vector<char> in_mask_;
  std::vector<ArrayStuckAt> array_stuck_;
  std::map<std::string, Unit> units_;
  std::map<std::string, Block> blocks_;
  std::vector<OutCell> gemm_out_;
  Address next_addr_ = 0;
  std::uint64_t cycle_ = 0;
  TrialResult result_;
};

}  // namespace

TrialResult run_trial(const PreparedWorkload& wl, const FaultPlan& plan, bool protect, std::uint64_t trial) {
  return TrialRunner(wl, plan, protect, trial).run();
}

// -- campaign ------------------------------------------------------------------

namespace {

/// Runs `count` independent tasks on a bounded pool; results land by index.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task) {
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct TaskResult {
  TrialRow row;
  std::map<SiteKind, SiteCounts> per_site;
  std::vector<DetectionEvent> events;
  ErrorLog log;
};

void add_counts(SiteCounts& into, const SiteCounts& c) {
  into.injected += c.injected;
  into.consequential += c.consequential;
  into.detected += c.detected;
  into.corrected += c.corrected;
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

CampaignRun run_campaign(const CampaignConfig& cfg) { return run_campaign(prepare_workload(cfg)); }

CampaignRun run_campaign(const PreparedWorkload& wl) {
  const CampaignConfig& cfg = wl.config;
  CampaignRun run;
  CampaignReport& rep = run.report;
  rep.config = cfg;
  rep.shield = wl.shield;
  rep.timing = pipeline_schedule(wl.groups_per_trial, wl.shield);
  rep.input_bits = wl.input_bits;
  rep.float_accuracy = wl.float_accuracy;
  rep.reference_accuracy = wl.reference_accuracy;
  rep.modeled_worst_latency_cycles =
      modeled_latency(wl.shield, wl.n, wl.n, wl.softmax_head ? wl.classes : std::size_t{2});

  // Golden outputs per batch, and the fault-free protected run beside them.
  const FaultPlan none;
  std::vector<std::vector<Word>> golden(wl.batches.size());
  std::size_t golden_correct = 0, golden_samples = 0;
  for (std::size_t b = 0; b < wl.batches.size(); ++b) {
    const TrialResult plain = run_trial(wl, none, false, b);
    const TrialResult guarded = run_trial(wl, none, true, b);
    golden[b] = plain.output;
    golden_correct += plain.correct;
    golden_samples += plain.samples;
    if (guarded.output != plain.output || !guarded.events.empty()) rep.decoupled = false;
  }
  if (wl.softmax_head) rep.golden_accuracy = ratio(golden_correct, golden_samples);

  const std::size_t per_rate = cfg.trials;
  const std::size_t total = per_rate * cfg.faults.rates.size();
  std::vector<TaskResult> results(total);
  parallel_for(total, cfg.threads, [&](std::size_t task) {
    const std::size_t ri = task / per_rate;
    const std::uint64_t trial = task % per_rate;
    const double rate = cfg.faults.rates[ri];
    const FaultPlan plan = plan_for_trial(wl, rate, ri, trial);
    TrialResult guarded = run_trial(wl, plan, true, trial);
    const TrialResult plain = run_trial(wl, plan, false, trial);
    TaskResult& out = results[task];
    out.row.rate = rate;
    out.row.trial = trial;
    for (const auto& f : guarded.faults) {
      SiteCounts c;
      c.injected = 1;
      c.consequential = f.consequential;
      c.detected = f.consequential && f.detected;
      c.corrected = f.consequential && f.detected && f.corrected;
      add_counts(out.row.counts, c);
      add_counts(out.per_site[f.kind], c);
    }
    out.row.samples = guarded.samples;
    out.row.correct_protected = guarded.correct;
    out.row.correct_unprotected = plain.correct;
    out.row.output_ok_protected = guarded.output == golden[guarded.batch];
    out.row.output_ok_unprotected = plain.output == golden[plain.batch];
    out.events = std::move(guarded.events);
    out.log = std::move(guarded.error_log);
  });

  // Ordered reduction.
  std::map<std::tuple<Address, std::int32_t, std::int32_t, ErrorKind>, ErrorRecord> errors;
  for (std::size_t ri = 0; ri < cfg.faults.rates.size(); ++ri) {
    RateReport rr;
    rr.rate = cfg.faults.rates[ri];
    rr.trials = per_rate;
    std::uint64_t correct_p = 0, correct_u = 0, samples = 0;
    std::map<Component, std::pair<std::uint64_t, double>> lat_sum;
    for (std::size_t t = 0; t < per_rate; ++t) {
      TaskResult& r = results[ri * per_rate + t];
      add_counts(rr.totals, r.row.counts);
      for (const auto& [k, c] : r.per_site) add_counts(rr.per_site[k], c);
      correct_p += r.row.correct_protected;
      correct_u += r.row.correct_unprotected;
      samples += r.row.samples;
      if (!r.row.output_ok_protected) ++rr.corrupted_outputs_protected;
      if (!r.row.output_ok_unprotected) ++rr.corrupted_outputs_unprotected;
      for (const auto& e : r.events) {
        auto& s = rr.latency[e.component];
        ++s.events;
        s.worst_cycles = std::max(s.worst_cycles, e.latency_cycles);
        lat_sum[e.component].second += static_cast<double>(e.latency_cycles);
        run.events.push_back({rr.rate, r.row.trial, e});
      }
      for (const auto& e : r.log) {
        auto& agg = errors[{e.address, e.row, e.col_or_tile, e.kind}];
        if (agg.count == 0) agg = e;
        else {
          agg.count += e.count;
          agg.last_delta = e.last_delta;
        }
      }
      run.trials.push_back(r.row);
    }
    for (auto& [c, s] : rr.latency) s.mean_cycles = lat_sum[c].second / static_cast<double>(s.events);
    rr.detection_coverage = ratio(rr.totals.detected, rr.totals.consequential);
    rr.correction_coverage = ratio(rr.totals.corrected, rr.totals.detected);
    rr.raw_detection_coverage = ratio(rr.totals.detected, rr.totals.injected);
    if (wl.softmax_head) {
      rr.accuracy_protected = ratio(correct_p, samples);
      rr.accuracy_unprotected = ratio(correct_u, samples);
    }
    rep.rates.push_back(std::move(rr));
  }
  for (auto& [k, e] : errors) run.error_log.push_back(e);
  return run;
}

// -- sensitivity sweep -------------------------------------------------------------

namespace {

/// Forward pass identical to mlp_forward, with bit flips applied to the
/// input of each layer. `act_flips[l]` holds (index, bit) pairs.
std::vector<float> forward_with_flips(const Mlp& m, std::span<const float> x,
                                      const std::vector<std::vector<std::pair<std::size_t, unsigned>>>& act_flips) {
  std::vector<float> cur(x.begin(), x.end());
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    for (const auto& [i, bit] : act_flips[li])
      cur[i] = std::bit_cast<float>(std::bit_cast<std::uint32_t>(cur[i]) ^ (1u << bit));
    const auto& l = m.layers[li];
    std::vector<float> next(l.b.begin(), l.b.end());
    for (std::size_t k = 0; k < l.in(); ++k) {
      const float xk = cur[k];
      const auto row = l.w.row(k);
      for (std::size_t j = 0; j < l.out(); ++j) next[j] += xk * row[j];
    }
    if (li + 1 < m.layers.size())
      for (auto& v : next) v = std::max(v, 0.0f);
    cur = std::move(next);
  }
  return cur;
}

unsigned nth_set_bit(std::uint32_t mask, std::uint64_t n) {
  for (unsigned b = 0; b < 32; ++b)
    if ((mask >> b) & 1u) {
      if (n == 0) return b;
      --n;
    }
  return 0;
}

}  // namespace

SensitivityReport sensitivity_sweep(const SensitivityConfig& cfg) {
  if (cfg.trials == 0) throw ConfigurationError("sensitivity sweep needs at least one trial");
  if (cfg.layers.size() < 2 || cfg.layers.front() != cfg.blobs.features || cfg.layers.back() != cfg.blobs.classes)
    throw ConfigurationError("sensitivity layer widths must match the dataset");
  for (const double r : cfg.rates)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigurationError("fault rates must lie in [0, 1]");
  for (const BitClass c : cfg.classes)
    if (bit_class_mask(DType::Fp32, c).bits == 0) throw ConfigurationError("empty bit class");

  SensitivityReport rep;
  rep.config = cfg;
  const Dataset train = make_blobs(cfg.blobs, 0, cfg.train_samples);
  const Dataset eval = make_blobs(cfg.blobs, 2, cfg.eval_samples);
  const Mlp model = train_mlp(train, cfg.layers, cfg.train);
  rep.baseline_accuracy = mlp_accuracy(model, eval);

  // Resident words: every weight and bias, then every layer input of every sample.
  std::uint64_t weight_words = 0;
  for (const auto& l : model.layers) weight_words += l.w.flat().size() + l.b.size();
  std::uint64_t act_words_per_sample = 0;
  for (const auto& l : model.layers) act_words_per_sample += l.in();
  const std::uint64_t total_words = weight_words + act_words_per_sample * eval.size();
  rep.resident_bits = total_words * 32;

  const std::size_t nc = cfg.classes.size(), nr = cfg.rates.size();
  std::vector<double> acc(nc * nr * cfg.trials, 0.0);
  std::vector<std::uint64_t> flips(nc * nr * cfg.trials, 0);

  parallel_for(acc.size(), cfg.threads, [&](std::size_t task) {
    const std::size_t ci = task / (nr * cfg.trials);
    const std::size_t ri = (task / cfg.trials) % nr;
    const std::size_t trial = task % cfg.trials;
    const std::uint32_t mask = bit_class_mask(DType::Fp32, cfg.classes[ci]).bits;
    const auto mask_bits = static_cast<std::uint64_t>(std::popcount(mask));
    // Positions are shared by every bit class (paired design); bits are not.
    CounterRng where(cfg.seed, 0x5E45 + ri, trial);
    CounterRng which(cfg.seed ^ 0xB175ull, (ri << 8) | ci, trial);
    const std::uint64_t count = where.binomial(rep.resident_bits, cfg.rates[ri]);

    Mlp m = model;
    std::vector<std::vector<std::vector<std::pair<std::size_t, unsigned>>>> act(
        eval.size(), std::vector<std::vector<std::pair<std::size_t, unsigned>>>(m.layers.size()));
    for (std::uint64_t f = 0; f < count; ++f) {
      std::uint64_t word = where.below(total_words);
      const unsigned bit = nth_set_bit(mask, which.below(mask_bits));
      if (word < weight_words) {
        for (auto& l : m.layers) {
          const std::uint64_t size = l.w.flat().size() + l.b.size();
          if (word >= size) {
            word -= size;
            continue;
          }
          float& v = word < l.w.flat().size() ? l.w.flat()[word] : l.b[word - l.w.flat().size()];
          v = std::bit_cast<float>(std::bit_cast<std::uint32_t>(v) ^ (1u << bit));
          break;
        }
      } else {
        word -= weight_words;
        const std::size_t s = word / act_words_per_sample;
        std::uint64_t off = word % act_words_per_sample;
        for (std::size_t li = 0; li < m.layers.size(); ++li) {
          if (off < m.layers[li].in()) {
            act[s][li].push_back({static_cast<std::size_t>(off), bit});
            break;
          }
          off -= m.layers[li].in();
        }
      }
    }
    std::size_t hits = 0;
    for (std::size_t s = 0; s < eval.size(); ++s)
      if (argmax(forward_with_flips(m, eval.x.row(s), act[s])) == eval.labels[s]) ++hits;
    acc[task] = static_cast<double>(hits) / static_cast<double>(eval.size());
    flips[task] = count;
  });

  for (std::size_t ci = 0; ci < nc; ++ci)
    for (std::size_t ri = 0; ri < nr; ++ri) {
      SensitivityCell cell;
      cell.bit_class = cfg.classes[ci];
      cell.rate = cfg.rates[ri];
      double a = 0.0, f = 0.0;
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        a += acc[(ci * nr + ri) * cfg.trials + t];
        f += static_cast<double>(flips[(ci * nr + ri) * cfg.trials + t]);
      }
      cell.accuracy = a / static_cast<double>(cfg.trials);
      cell.drop_points = (rep.baseline_accuracy - cell.accuracy) * 100.0;
      cell.mean_flips = f / static_cast<double>(cfg.trials);
      rep.cells.push_back(cell);
    }
  return rep;
}

}  // namespace npuguard
