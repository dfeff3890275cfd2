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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace npuguard {

/// A row or column whose stored checksum disagrees with the recomputed one.
/// `delta` is stored minus recomputed, in the checker's arithmetic.
struct Discrepancy {
  std::size_t index = 0;
  double delta = 0.0;
};

struct CellPairing {
  std::size_t row = 0;
  std::size_t col = 0;
  double delta = 0.0;
};

struct CrossLocalisation {
  /// Intersections where the row and column each have exactly one partner
  /// with a consistent delta.
  std::vector<CellPairing> pairs;
  std::vector<Discrepancy> rows_left;
  std::vector<Discrepancy> cols_left;
  /// A delta was consistent with more than one candidate intersection.
  bool ambiguous = false;
};

using DeltaMatch = std::function<bool(double, double)>;

/// Pairs mismatching rows with mismatching columns whose deltas agree.
/// A single faulty cell shifts its row and its column by the same amount,
/// so only one-to-one agreements are trusted.
CrossLocalisation cross_localise(std::span<const Discrepancy> rows,
                                 std::span<const Discrepancy> cols,
                                 const DeltaMatch& same);

inline bool exact_match(double a, double b) { return a == b; }

}  // namespace npuguard
