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
 * @file systolic_shield.hpp
 * @brief Functional systolic array (C = A x B + D) and the decoupled shield group.
 *
 * The shield predicts the row and column sums of C from the operands alone:
 *
 *   row_check[i] = A[i,:] . sB + rowsum(D)[i],   sB[k] = sum_j B[k][j]
 *   col_check[j] = sA . B[:,j] + colsum(D)[j],   sA[k] = sum_i A[i][k]
 *
 * which equals the ABFT row/column checksums of C. The column checks are
 * formed by streaming the rows of B^T through the transposer.
 *
 * Array dataflow used for fault propagation:
 *
 *   WS  PE(k,j) holds B[k][j]; A[i][k] enters PE row k and moves right, the
 *       partial sum of C[i][j] moves down column j.
 *   OS  PE(i,j) accumulates C[i][j]; A[i][k] moves right along row i and
 *       B[k][j] moves down column j.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "npuguard/errors.hpp"
#include "npuguard/guarded_memory.hpp"
#include "npuguard/localisation.hpp"
#include "npuguard/matrix.hpp"
#include "npuguard/numerics.hpp"

namespace npuguard {

enum class Dataflow { WS, OS };
std::string to_string(Dataflow d);
Dataflow parse_dataflow(std::string_view s);

struct ArrayGeometry {
  unsigned tiles_per_row = 1;  // I
  unsigned pes_per_tile = 1;   // J, PEs per row inside one tile
  Dataflow mode = Dataflow::WS;

  /// Matrix dimension handled per tile-group, I*J.
  unsigned dim() const { return tiles_per_row * pes_per_tile; }
};

/// Cycles from the first input entering the array to the last output
/// leaving it: I*J + 2I - 1.
unsigned array_window(const ArrayGeometry& g);
/// Start-up plus adder-tree term of the shield latency:
/// max{0, floor(log2(ceil(IJ / 2^J)) / J)} + 1.
unsigned adder_tree_term(const ArrayGeometry& g);
/// Shield-group latency for `shields` parallel shields:
/// ceil(2IJ / K) + 1 + adder_tree_term.
unsigned shield_latency(const ArrayGeometry& g, unsigned shields);

struct ShieldConfig {
  ArrayGeometry geometry;
  unsigned shields = 1;         // K
  unsigned sigma = 0;           // shield latency, cycles
  unsigned array_window = 0;    // L_SA, cycles
  unsigned tree_depth = 0;      // adder_tree_term
  unsigned adder_levels = 0;    // ceil(log2(IJ)), full reduction depth
  unsigned levels_per_stage = 0;  // adder levels between pipeline registers, <= J
};

/// Smallest K with sigma(K) <= L_SA:
/// K = ceil(2IJ / (IJ + 2I - 3 - max{0, floor(log2(ceil(IJ / 2^J)) / J)})).
/// Throws ConfigurationError when the denominator is not positive.
ShieldConfig configure_shields(const ArrayGeometry& g);

/// Four-stage overlap model of one kernel made of `groups` tile-groups.
///
///   S1 checksum of A        I*J
///   S2 preload + transpose  I*J
///   S3 compute || shield    max(L_SA, sigma)
///   S4 verify + correct     ceil(I*J / K) + tree_depth + 1
///
/// S1 of group n+1 hides under S3 of group n and S4 of group n under S2 of
/// group n+1, so only the first S1 and the last S4 are exposed.
struct TimingReport {
  std::uint64_t groups = 0;
  std::uint64_t s1_cycles = 0;
  std::uint64_t s2_cycles = 0;
  std::uint64_t s3_cycles = 0;
  std::uint64_t s4_cycles = 0;
  std::uint64_t baseline_cycles = 0;   // groups * (S2 + L_SA)
  std::uint64_t protected_cycles = 0;  // S1 + groups * (S2 + S3) + S4
  double slowdown = 1.0;
  std::uint64_t worst_detection_latency_cycles = 0;  // S3 + S4
};

/// Throws std::invalid_argument for zero groups.
TimingReport pipeline_schedule(std::uint64_t groups, const ShieldConfig& cfg);

// -- array faults -------------------------------------------------------------

enum class Operand { A, B, D };
enum class PeRegister { PartialSum, ForwardedInput, Weight };

/// A one-shot flip inside the array during one tile-group.
struct ArrayTransient {
  enum class Kind {
    Operand,         // operand word as it enters the array edge: (operand, row, col)
    PartialSum,      // partial sum of C[i][j] after the k-th MAC: (i, k, j)
    ForwardedInput,  // A[i][k] in the forward register at column j: (i, k, j)
    Weight,          // WS: stationary B[k][j], all i; OS: B[k][j] passing PE row i
  };
  Kind kind = Kind::PartialSum;
  Operand operand = Operand::A;
  std::uint32_t i = 0, k = 0, j = 0;
  unsigned bit = 0;
};

/// A register inside PE(pe_row, pe_col) with one bit stuck for the whole trial.
struct ArrayStuckAt {
  std::uint32_t pe_row = 0;
  std::uint32_t pe_col = 0;
  PeRegister reg = PeRegister::PartialSum;
  unsigned bit = 0;
  bool value = false;
};

struct ArrayFaultSet {
  std::vector<ArrayTransient> transients;
  std::vector<ArrayStuckAt> stuck;
  bool empty() const { return transients.empty() && stuck.empty(); }
};

/// C = A x B + D on an N x N tile-group with N = geometry.dim(). Products
/// accumulate in the accumulator type in ascending k, then D is added.
/// Throws ShapeError on dimension or dtype mismatch.
WordMatrix gemm(const WordMatrix& a, const WordMatrix& b, const WordMatrix& d, const ArrayGeometry& g,
                const ArrayFaultSet& faults = {});

/// Reference product without any array modelling; used as an oracle.
WordMatrix reference_gemm(const WordMatrix& a, const WordMatrix& b, const WordMatrix& d);

// -- shield --------------------------------------------------------------------

struct ShieldChecksums {
  std::vector<Word> row_check;  // accumulator dtype
  std::vector<Word> col_check;
};

/// Row sums / column sums of a matrix in accumulator arithmetic.
std::vector<Word> numeric_row_sums(const WordMatrix& m);
std::vector<Word> numeric_col_sums(const WordMatrix& m);

/// Converts raw guardpad sums of an accumulator block into shield operands.
/// Valid for Int32 blocks with a full mask, where the raw wrap-around sum is
/// the integer sum modulo 2^32.
std::vector<Word> guardpad_sums_as_words(std::span<const std::uint32_t> sums, DType acc);

/// Exact transpose of a square matrix. Throws ShapeError otherwise.
WordMatrix transpose_stream(const WordMatrix& b);

ShieldChecksums shield_checksums(const WordMatrix& a, const WordMatrix& b,
                                 std::span<const Word> d_row_sums, std::span<const Word> d_col_sums);

enum class ArrayStatus { Clean, Corrected, TileFault, Uncorrectable };
std::string to_string(ArrayStatus s);

struct ArrayCorrection {
  std::size_t row = 0;
  std::size_t col = 0;
  double delta = 0.0;  // check - recomputed, in accumulator units
};

struct ArrayOutcome {
  ArrayStatus status = ArrayStatus::Clean;
  std::vector<ArrayCorrection> corrections;
  /// Tile holding the fault; -1 marks an axis that cannot be localised.
  std::optional<TileCoord> tile;
  std::vector<Discrepancy> row_mismatches;
  std::vector<Discrepancy> col_mismatches;
  std::uint64_t detection_latency_cycles = 0;
};

struct ShieldTolerance {
  double rel_fp32 = 1.0 / (1 << 18);
  double rel_bf16 = 1.0 / (1 << 10);
};

/// Compares C against the predicted checks and repairs what can be located.
///
/// Integer types compare exactly. Floats accept |delta| <= rel * scale with
/// scale = max(|check|, sum |C| along the line, 1).
///
/// Resolution order: one row + one column with consistent deltas -> the
/// intersection is corrected; all mismatches confined to one row (or one
/// column) with consistent line sums -> every cell of that line is rebuilt
/// from the crossing checks; several rows and columns that pair one-to-one
/// -> every pair is corrected. Failing that, WS reports the tile holding the
/// earliest mismatching column and OS the tile at the earliest mismatching
/// row and column; anything else is Uncorrectable. Line corrections also
/// fill `tile` with the suspect tile row or column.
ArrayOutcome shield_verify(WordMatrix& c, const ShieldChecksums& checks, const ShieldConfig& cfg,
                           DType input_dtype, const ShieldTolerance& tol = {});

}  // namespace npuguard
