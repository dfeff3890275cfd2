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

#include "npuguard/systolic_shield.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

namespace npuguard {

std::string to_string(Dataflow d) { return d == Dataflow::WS ? "WS" : "OS"; }

Dataflow parse_dataflow(std::string_view s) {
  if (s == "WS" || s == "ws") return Dataflow::WS;
  if (s == "OS" || s == "os") return Dataflow::OS;
  throw std::invalid_argument("unknown dataflow: " + std::string(s));
}

std::string to_string(ArrayStatus s) {
  switch (s) {
    case ArrayStatus::Clean: return "clean";
    case ArrayStatus::Corrected: return "corrected";
    case ArrayStatus::TileFault: return "tile_fault";
    case ArrayStatus::Uncorrectable: return "uncorrectable";
  }
  return "?";
}

namespace {

void check_geometry(const ArrayGeometry& g) {
  if (g.tiles_per_row == 0 || g.pes_per_tile == 0)
    throw ConfigurationError("array geometry needs I >= 1 and J >= 1");
  if (static_cast<std::uint64_t>(g.tiles_per_row) * g.pes_per_tile > 4096)
    throw ConfigurationError("array dimension I*J above 4096 is not supported");
}

unsigned ceil_div(unsigned a, unsigned b) { return (a + b - 1) / b; }

unsigned ceil_log2(unsigned x) { return x <= 1 ? 0 : static_cast<unsigned>(std::bit_width(x - 1)); }

/// Largest d with 2^(d*J) <= x, i.e. floor(log2(x) / J), for x >= 1.
unsigned floor_log2_over(unsigned x, unsigned j) {
  const unsigned lg = static_cast<unsigned>(std::bit_width(x)) - 1;
  return lg / j;
}

}  // namespace

unsigned array_window(const ArrayGeometry& g) {
  check_geometry(g);
  return g.dim() + 2 * g.tiles_per_row - 1;
}

unsigned adder_tree_term(const ArrayGeometry& g) {
  check_geometry(g);
  const unsigned n = g.dim();
  const unsigned x = g.pes_per_tile >= 32 ? 1u : ceil_div(n, 1u << g.pes_per_tile);
  return floor_log2_over(x, g.pes_per_tile) + 1;
}

unsigned shield_latency(const ArrayGeometry& g, unsigned shields) {
  if (shields == 0) throw ConfigurationError("shield count must be positive");
  return ceil_div(2 * g.dim(), shields) + 1 + adder_tree_term(g);
}

ShieldConfig configure_shields(const ArrayGeometry& g) {
  check_geometry(g);
  const unsigned n = g.dim();
  const unsigned d = adder_tree_term(g);
  const long den = static_cast<long>(n) + 2L * g.tiles_per_row - 3 - static_cast<long>(d - 1);
  if (den <= 0) throw ConfigurationError("no shield count fits inside the array window for this geometry");

  ShieldConfig cfg;
  cfg.geometry = g;
  cfg.shields = ceil_div(2 * n, static_cast<unsigned>(den));
  cfg.sigma = shield_latency(g, cfg.shields);
  cfg.array_window = array_window(g);
  cfg.tree_depth = d;
  cfg.adder_levels = ceil_log2(n);
  // The start-up cycle and the d tree cycles each hold at most J adder levels.
  cfg.levels_per_stage = ceil_div(cfg.adder_levels, d + 1);
  if (cfg.levels_per_stage > g.pes_per_tile)
    throw ConfigurationError("adder tree needs more than J levels per pipeline stage");
  return cfg;
}

TimingReport pipeline_schedule(std::uint64_t groups, const ShieldConfig& cfg) {
  if (groups == 0) throw std::invalid_argument("pipeline_schedule needs at least one tile-group");
  const std::uint64_t n = cfg.geometry.dim();
  TimingReport t;
  t.groups = groups;
  t.s1_cycles = n;
  t.s2_cycles = n;
  t.s3_cycles = std::max(cfg.array_window, cfg.sigma);
  t.s4_cycles = ceil_div(static_cast<unsigned>(n), cfg.shields) + cfg.tree_depth + 1;
  t.baseline_cycles = groups * (t.s2_cycles + cfg.array_window);
  t.protected_cycles = t.s1_cycles + groups * (t.s2_cycles + t.s3_cycles) + t.s4_cycles;
  t.slowdown = static_cast<double>(t.protected_cycles) / static_cast<double>(t.baseline_cycles);
  t.worst_detection_latency_cycles = t.s3_cycles + t.s4_cycles;
  return t;
}

// -- array ---------------------------------------------------------------------

namespace {

void check_operands(const WordMatrix& a, const WordMatrix& b, const WordMatrix& d) {
  if (a.empty() || a.cols() != b.rows() || d.rows() != a.rows() || d.cols() != b.cols())
    throw ShapeError("gemm operand shapes do not agree");
  const DType in = a.flat()[0].dtype;
  if (b.flat()[0].dtype != in) throw ShapeError("gemm operands A and B differ in type");
  if (d.flat()[0].dtype != accumulator_dtype(in)) throw ShapeError("gemm D must be of the accumulator type");
}

struct StuckMasks {
  std::uint32_t clear = 0;
  std::uint32_t set = 0;
  std::uint32_t apply(std::uint32_t v) const { return (v & ~clear) | set; }
};

/// Per-PE stuck bits for one register kind, indexed pe_row * n + pe_col.
class StuckMap {
 public:
  explicit StuckMap(std::size_t n) : n_(n) {}
  void add(const ArrayStuckAt& s) {
    if (masks_.empty()) masks_.assign(n_ * n_, {});
    auto& m = masks_[s.pe_row * n_ + s.pe_col];
    const std::uint32_t bit = 1u << s.bit;
    m.clear |= bit;
    if (s.value) m.set |= bit; else m.set &= ~bit;
  }
  std::uint32_t apply(std::size_t r, std::size_t c, std::uint32_t v) const {
    return masks_.empty() ? v : masks_[r * n_ + c].apply(v);
  }

 private:
  std::size_t n_;
  std::vector<StuckMasks> masks_;
};

using FlipMap = std::unordered_map<std::uint64_t, std::uint32_t>;

std::uint64_t key3(std::size_t i, std::size_t k, std::size_t j, std::size_t n) {
  return (static_cast<std::uint64_t>(i) * n + k) * n + j;
}

std::uint32_t flips_at(const FlipMap& m, std::uint64_t key) {
  if (m.empty()) return 0;
  const auto it = m.find(key);
  return it == m.end() ? 0 : it->second;
}

void check_bit(unsigned bit, DType t, const char* what) {
  if (bit >= bit_width(t)) throw std::out_of_range(std::string("array fault bit out of range for ") + what);
}

}  // namespace

WordMatrix reference_gemm(const WordMatrix& a, const WordMatrix& b, const WordMatrix& d) {
  check_operands(a, b, d);
  const DType acc_t = accumulator_dtype(a.flat()[0].dtype);
  WordMatrix c(a.rows(), b.cols(), zero_word(acc_t));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Word acc = zero_word(acc_t);
      for (std::size_t k = 0; k < a.cols(); ++k) acc = mac(acc, a(i, k), b(k, j));
      c(i, j) = acc_add(acc, d(i, j));
    }
  return c;
}

WordMatrix gemm(const WordMatrix& a_in, const WordMatrix& b_in, const WordMatrix& d_in, const ArrayGeometry& g,
                const ArrayFaultSet& faults) {
  check_geometry(g);
  check_operands(a_in, b_in, d_in);
  const std::size_t n = g.dim();
  if (a_in.rows() != n || a_in.cols() != n || b_in.cols() != n)
    throw ShapeError("gemm operands must be I*J x I*J");
  if (faults.empty()) return reference_gemm(a_in, b_in, d_in);

  const DType in_t = a_in.flat()[0].dtype;
  const DType acc_t = accumulator_dtype(in_t);
  WordMatrix a = a_in, b = b_in, d = d_in;
  FlipMap psum, fwd, weight;
  StuckMap stuck_psum(n), stuck_fwd(n), stuck_weight(n);

  for (const auto& t : faults.transients) {
    if (t.i >= n || t.k >= n || t.j >= n) throw std::out_of_range("array transient coordinate out of range");
    switch (t.kind) {
      case ArrayTransient::Kind::Operand: {
        WordMatrix& m = t.operand == Operand::A ? a : (t.operand == Operand::B ? b : d);
        Word& w = m(t.i, t.j);
        w = flip_bit(w, t.bit);
        break;
      }
      case ArrayTransient::Kind::PartialSum:
        check_bit(t.bit, acc_t, "partial sum");
        psum[key3(t.i, t.k, t.j, n)] ^= 1u << t.bit;
        break;
      case ArrayTransient::Kind::ForwardedInput:
        check_bit(t.bit, in_t, "forwarded input");
        fwd[key3(t.i, t.k, t.j, n)] ^= 1u << t.bit;
        break;
      case ArrayTransient::Kind::Weight: {
        check_bit(t.bit, in_t, "weight");
        // A stationary weight is shared by every row of A.
        const std::size_t i = g.mode == Dataflow::WS ? 0 : t.i;
        weight[key3(i, t.k, t.j, n)] ^= 1u << t.bit;
        break;
      }
    }
  }
  for (const auto& s : faults.stuck) {
    if (s.pe_row >= n || s.pe_col >= n) throw std::out_of_range("stuck-at PE out of range");
    switch (s.reg) {
      case PeRegister::PartialSum: check_bit(s.bit, acc_t, "partial sum"); stuck_psum.add(s); break;
      case PeRegister::ForwardedInput: check_bit(s.bit, in_t, "forwarded input"); stuck_fwd.add(s); break;
      case PeRegister::Weight: check_bit(s.bit, in_t, "weight"); stuck_weight.add(s); break;
    }
  }

  // a_at(i,k,j): the A[i][k] word seen by the MAC for C[i][j].
  // b_at(i,k,j): the B[k][j] word seen by the MAC for C[i][j].
  const bool ws = g.mode == Dataflow::WS;
  std::vector<Word> a_at(n * n * n), b_at(n * n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t v = a(i, k).bits;
      for (std::size_t j = 0; j < n; ++j) {
        v ^= flips_at(fwd, key3(i, k, j, n));
        v = ws ? stuck_fwd.apply(k, j, v) : stuck_fwd.apply(i, j, v);
        a_at[key3(i, k, j, n)] = Word::from_bits(v, in_t);
      }
    }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      if (ws) {
        std::uint32_t v = b(k, j).bits ^ flips_at(weight, key3(0, k, j, n));
        const Word w = Word::from_bits(stuck_weight.apply(k, j, v), in_t);
        for (std::size_t i = 0; i < n; ++i) b_at[key3(i, k, j, n)] = w;
      } else {
        std::uint32_t v = b(k, j).bits;
        for (std::size_t i = 0; i < n; ++i) {
          v ^= flips_at(weight, key3(i, k, j, n));
          v = stuck_weight.apply(i, j, v);
          b_at[key3(i, k, j, n)] = Word::from_bits(v, in_t);
        }
      }
    }

  WordMatrix c(n, n, zero_word(acc_t));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Word acc = zero_word(acc_t);
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t key = key3(i, k, j, n);
        acc = mac(acc, a_at[key], b_at[key]);
        std::uint32_t v = acc.bits ^ flips_at(psum, key);
        v = ws ? stuck_psum.apply(k, j, v) : stuck_psum.apply(i, j, v);
        acc = Word::from_bits(v, acc_t);
      }
      c(i, j) = acc_add(acc, d(i, j));
    }
  return c;
}

// -- shield --------------------------------------------------------------------

std::vector<Word> numeric_row_sums(const WordMatrix& m) {
  std::vector<Word> out;
  out.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Word acc = zero_word(accumulator_dtype(m(i, 0).dtype));
    for (std::size_t j = 0; j < m.cols(); ++j) acc = acc_add(acc, widen(m(i, j)));
    out.push_back(acc);
  }
  return out;
}

std::vector<Word> numeric_col_sums(const WordMatrix& m) {
  std::vector<Word> out;
  out.reserve(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    Word acc = zero_word(accumulator_dtype(m(0, j).dtype));
    for (std::size_t i = 0; i < m.rows(); ++i) acc = acc_add(acc, widen(m(i, j)));
    out.push_back(acc);
  }
  return out;
}

std::vector<Word> guardpad_sums_as_words(std::span<const std::uint32_t> sums, DType acc) {
  if (acc != DType::Int32) throw std::invalid_argument("raw guardpad sums are numeric only for Int32 blocks");
  std::vector<Word> out;
  out.reserve(sums.size());
  for (const auto s : sums) out.push_back(Word{s, DType::Int32});
  return out;
}

WordMatrix transpose_stream(const WordMatrix& b) {
  if (b.rows() != b.cols()) throw ShapeError("transposer needs a square block");
  return transpose(b);
}

ShieldChecksums shield_checksums(const WordMatrix& a, const WordMatrix& b, std::span<const Word> d_row_sums,
                                 std::span<const Word> d_col_sums) {
  if (a.empty() || a.cols() != b.rows() || d_row_sums.size() != a.rows() || d_col_sums.size() != b.cols())
    throw ShapeError("shield operand shapes do not agree");
  const DType acc_t = accumulator_dtype(a(0, 0).dtype);
  const std::size_t n = a.cols();

  // Row checks: each row of A against the row sums of B.
  std::vector<Word> s_b(n, zero_word(acc_t));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < b.cols(); ++j) s_b[k] = acc_add(s_b[k], widen(b(k, j)));

  ShieldChecksums out;
  out.row_check.reserve(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Word acc = zero_word(acc_t);
    for (std::size_t k = 0; k < n; ++k) acc = mac(acc, widen(a(i, k)), s_b[k]);
    out.row_check.push_back(acc_add(acc, d_row_sums[i]));
  }

  // Column checks: the column sums of A against each row of B^T.
  std::vector<Word> s_a(n, zero_word(acc_t));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < n; ++k) s_a[k] = acc_add(s_a[k], widen(a(i, k)));
  const WordMatrix bt = transpose_stream(b);
  out.col_check.reserve(bt.rows());
  for (std::size_t j = 0; j < bt.rows(); ++j) {
    Word acc = zero_word(acc_t);
    for (std::size_t k = 0; k < n; ++k) acc = mac(acc, s_a[k], widen(bt(j, k)));
    out.col_check.push_back(acc_add(acc, d_col_sums[j]));
  }
  return out;
}

namespace {

struct LineCheck {
  std::vector<Discrepancy> mismatches;
  std::vector<double> scale;
};

double word_delta(Word check, Word actual) {
  if (check.dtype == DType::Int32)
    return static_cast<double>(static_cast<std::int32_t>(check.bits - actual.bits));
  return decode_word(check) - decode_word(actual);
}

struct Comparator {
  bool exact = true;
  double rel = 0.0;
  double base = 0.0;  // rel * max(1, largest |check|)

  bool mismatch(double delta, double scale) const {
    if (exact) return delta != 0.0;
    if (!std::isfinite(delta)) return true;
    return std::abs(delta) > rel * scale;
  }
  bool same(double x, double y) const {
    if (exact) return x == y;
    if (!std::isfinite(x) || !std::isfinite(y)) return !std::isfinite(x) && !std::isfinite(y);
    return std::abs(x - y) <= rel * std::max(std::abs(x), std::abs(y)) + base;
  }
};

void compare(const WordMatrix& c, const ShieldChecksums& checks, const Comparator& cmp,
             std::vector<Discrepancy>& rows, std::vector<Discrepancy>& cols) {
  rows.clear();
  cols.clear();
  const auto row_sums = numeric_row_sums(c);
  const auto col_sums = numeric_col_sums(c);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    double mag = 0.0;
    for (std::size_t j = 0; j < c.cols(); ++j) mag += std::abs(decode_word(c(i, j)));
    const double scale = std::max({std::abs(decode_word(checks.row_check[i])), mag, 1.0});
    const double delta = word_delta(checks.row_check[i], row_sums[i]);
    if (cmp.mismatch(delta, scale)) rows.push_back({i, delta});
  }
  for (std::size_t j = 0; j < c.cols(); ++j) {
    double mag = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i) mag += std::abs(decode_word(c(i, j)));
    const double scale = std::max({std::abs(decode_word(checks.col_check[j])), mag, 1.0});
    const double delta = word_delta(checks.col_check[j], col_sums[j]);
    if (cmp.mismatch(delta, scale)) cols.push_back({j, delta});
  }
}

/// Rebuilds C[i][j] from a check and the other cells of its line.
void rebuild_from_row(WordMatrix& c, std::size_t i, std::size_t j, Word check) {
  if (check.dtype == DType::Int32) {
    std::uint32_t v = check.bits;
    for (std::size_t jj = 0; jj < c.cols(); ++jj)
      if (jj != j) v -= c(i, jj).bits;
    c(i, j) = Word{v, DType::Int32};
    return;
  }
  double v = decode_word(check);
  for (std::size_t jj = 0; jj < c.cols(); ++jj)
    if (jj != j) v -= decode_word(c(i, jj));
  c(i, j) = Word{std::bit_cast<std::uint32_t>(static_cast<float>(v)), DType::Fp32};
}

void rebuild_from_col(WordMatrix& c, std::size_t i, std::size_t j, Word check) {
  if (check.dtype == DType::Int32) {
    std::uint32_t v = check.bits;
    for (std::size_t ii = 0; ii < c.rows(); ++ii)
      if (ii != i) v -= c(ii, j).bits;
    c(i, j) = Word{v, DType::Int32};
    return;
  }
  double v = decode_word(check);
  for (std::size_t ii = 0; ii < c.rows(); ++ii)
    if (ii != i) v -= decode_word(c(ii, j));
  c(i, j) = Word{std::bit_cast<std::uint32_t>(static_cast<float>(v)), DType::Fp32};
}

bool line_consistent(const Discrepancy& line, const std::vector<Discrepancy>& cross, const Comparator& cmp,
                     bool integer) {
  if (integer) {
    std::uint32_t sum = 0;
    for (const auto& x : cross) sum += static_cast<std::uint32_t>(static_cast<std::int32_t>(x.delta));
    return sum == static_cast<std::uint32_t>(static_cast<std::int32_t>(line.delta));
  }
  double sum = 0.0;
  for (const auto& x : cross) sum += x.delta;
  return cmp.same(sum, line.delta);
}

}  // namespace

ArrayOutcome shield_verify(WordMatrix& c, const ShieldChecksums& checks, const ShieldConfig& cfg, DType input_dtype,
                           const ShieldTolerance& tol) {
  if (checks.row_check.size() != c.rows() || checks.col_check.size() != c.cols())
    throw ShapeError("shield checks do not match the output block");
  const bool integer = !is_float(input_dtype);
  Comparator cmp;
  cmp.exact = integer;
  cmp.rel = input_dtype == DType::Bf16 ? tol.rel_bf16 : tol.rel_fp32;
  if (!integer) {
    double largest = 1.0;
    for (const auto& w : checks.row_check) largest = std::max(largest, std::abs(decode_word(w)));
    for (const auto& w : checks.col_check) largest = std::max(largest, std::abs(decode_word(w)));
    cmp.base = cmp.rel * (std::isfinite(largest) ? largest : 1.0);
  }

  ArrayOutcome out;
  const unsigned n = cfg.geometry.dim();
  out.detection_latency_cycles =
      std::max(cfg.array_window, cfg.sigma) + ceil_div(n, std::max(cfg.shields, 1u)) + cfg.tree_depth + 1;
  compare(c, checks, cmp, out.row_mismatches, out.col_mismatches);
  const auto& rows = out.row_mismatches;
  const auto& cols = out.col_mismatches;
  if (rows.empty() && cols.empty()) return out;

  const WordMatrix original = c;
  const unsigned jj = cfg.geometry.pes_per_tile;
  const bool os = cfg.geometry.mode == Dataflow::OS;
  bool attempted = false;

  if (rows.size() == 1 && cols.size() == 1) {
    if (cmp.same(rows[0].delta, cols[0].delta)) {
      rebuild_from_row(c, rows[0].index, cols[0].index, checks.row_check[rows[0].index]);
      out.corrections.push_back({rows[0].index, cols[0].index, rows[0].delta});
      attempted = true;
    }
  } else if (rows.size() == 1 && cols.size() > 1 && line_consistent(rows[0], cols, cmp, integer)) {
    // Every error sits in one row, so each mismatching column pins its cell.
    for (const auto& col : cols) {
      rebuild_from_col(c, rows[0].index, col.index, checks.col_check[col.index]);
      out.corrections.push_back({rows[0].index, col.index, col.delta});
    }
    out.tile = TileCoord{static_cast<std::int32_t>(rows[0].index / jj), -1};
    attempted = true;
  } else if (cols.size() == 1 && rows.size() > 1 && line_consistent(cols[0], rows, cmp, integer)) {
    for (const auto& row : rows) {
      rebuild_from_row(c, row.index, cols[0].index, checks.row_check[row.index]);
      out.corrections.push_back({row.index, cols[0].index, row.delta});
    }
    out.tile = TileCoord{-1, static_cast<std::int32_t>(cols[0].index / jj)};
    attempted = true;
  } else if (rows.size() > 1 && cols.size() > 1) {
    const auto loc = cross_localise(rows, cols, [&](double x, double y) { return cmp.same(x, y); });
    if (!loc.ambiguous && loc.rows_left.empty() && loc.cols_left.empty()) {
      for (const auto& p : loc.pairs) {
        rebuild_from_row(c, p.row, p.col, checks.row_check[p.row]);
        out.corrections.push_back({p.row, p.col, p.delta});
      }
      attempted = true;
    }
  }

  if (attempted) {
    std::vector<Discrepancy> r2, c2;
    compare(c, checks, cmp, r2, c2);
    if (r2.empty() && c2.empty()) {
      out.status = ArrayStatus::Corrected;
      return out;
    }
    c = original;
    out.corrections.clear();
    out.tile.reset();
  }

  if (!os && !cols.empty()) {
    out.status = ArrayStatus::TileFault;
    out.tile = TileCoord{-1, static_cast<std::int32_t>(cols.front().index / jj)};
  } else if (os && !rows.empty() && !cols.empty()) {
    out.status = ArrayStatus::TileFault;
    out.tile = TileCoord{static_cast<std::int32_t>(rows.front().index / jj),
                         static_cast<std::int32_t>(cols.front().index / jj)};
  } else {
    out.status = ArrayStatus::Uncorrectable;
  }
  return out;
}

}  // namespace npuguard
