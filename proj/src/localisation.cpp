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

#include "npuguard/localisation.hpp"

namespace npuguard {

CrossLocalisation cross_localise(std::span<const Discrepancy> rows,
                                 std::span<const Discrepancy> cols,
                                 const DeltaMatch& same) {
  const std::size_t nr = rows.size();
  const std::size_t nc = cols.size();
  std::vector<std::vector<std::size_t>> row_cands(nr), col_cands(nc);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c)
      if (same(rows[r].delta, cols[c].delta)) {
        row_cands[r].push_back(c);
        col_cands[c].push_back(r);
      }

  CrossLocalisation out;
  std::vector<bool> row_used(nr, false), col_used(nc, false);
  for (std::size_t r = 0; r < nr; ++r) {
    if (row_cands[r].size() > 1) out.ambiguous = true;
    if (row_cands[r].size() != 1) continue;
    const std::size_t c = row_cands[r].front();
    if (col_cands[c].size() != 1) continue;
    out.pairs.push_back({rows[r].index, cols[c].index, rows[r].delta});
    row_used[r] = true;
    col_used[c] = true;
  }
  for (std::size_t c = 0; c < nc; ++c)
    if (col_cands[c].size() > 1) out.ambiguous = true;

  for (std::size_t r = 0; r < nr; ++r)
    if (!row_used[r]) out.rows_left.push_back(rows[r]);
  for (std::size_t c = 0; c < nc; ++c)
    if (!col_used[c]) out.cols_left.push_back(cols[c]);
  return out;
}

}  // namespace npuguard
