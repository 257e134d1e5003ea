/*
 * Copyright 2026 The BrSGD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Test-only, line-by-line transcription of the BrSGD aggregator on nested
// vectors. Shares no code with include/brsgd so it can serve as an oracle.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace brsgd_oracle {

// Fixed capacities keep the transcription free of per-call allocations so
// it can be run over millions of small inputs.
inline constexpr std::size_t kMaxRows = 32;
inline constexpr std::size_t kMaxCols = 16;

struct ReferenceResult {
  std::vector<double> aggregate;
  std::vector<int> scores;
  std::vector<char> in_c1;
  std::vector<char> in_c2;
  bool empty = false;
};

// Writes into `res`, reusing its storage.
inline void ReferenceAggregate(const std::vector<std::vector<double>>& G,
                               double beta, double T, ReferenceResult& res) {
  const std::size_t m = G.size();
  const std::size_t d = G[0].size();
  if (m > kMaxRows || d > kMaxCols) throw std::length_error("oracle capacity");

  // a_c = (1/m) sum_r G[r][c]
  double a[kMaxCols];
  for (std::size_t c = 0; c < d; ++c) {
    a[c] = 0.0;
    for (std::size_t r = 0; r < m; ++r) a[c] = a[c] + G[r][c];
    a[c] = a[c] / static_cast<double>(m);
  }

  // Score matrix, one column at a time.
  int M[kMaxRows][kMaxCols];
  int s[kMaxRows];
  for (std::size_t r = 0; r < m; ++r) s[r] = 0;
  for (std::size_t c = 0; c < d; ++c) {
    int counter = 0;
    for (std::size_t r = 0; r < m; ++r) {
      if (G[r][c] >= a[c]) {
        M[r][c] = 1;
        counter = counter + 1;
      } else {
        M[r][c] = 0;
      }
    }
    if (counter < static_cast<double>(m) / 2.0) {
      for (std::size_t r = 0; r < m; ++r) M[r][c] = M[r][c] == 1 ? 0 : 1;
    }
    for (std::size_t r = 0; r < m; ++r) s[r] = s[r] + M[r][c];
  }
  res.scores.assign(s, s + m);

  // Coordinate median by full sort.
  double med[kMaxCols];
  double col[kMaxRows];
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < m; ++r) col[r] = G[r][c];
    std::sort(col, col + m);
    if (m % 2 == 1) {
      med[c] = col[m / 2];
    } else {
      med[c] = (col[m / 2 - 1] + col[m / 2]) / 2.0;
    }
  }

  // Constraint 1.
  res.in_c1.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    double l1 = 0.0;
    for (std::size_t c = 0; c < d; ++c) l1 += std::fabs(G[i][c] - med[c]);
    res.in_c1[i] = l1 <= 2.0 * T;
  }

  // Constraint 2: pick the best remaining score k times; the first index
  // wins among equals.
  std::size_t k = 0;
  while (static_cast<double>(k) < beta * static_cast<double>(m) - 1e-9) ++k;
  if (k == 0) k = 1;
  res.in_c2.assign(m, 0);
  for (std::size_t pick = 0; pick < k; ++pick) {
    int best = -1;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (res.in_c2[i]) continue;
      if (s[i] > best) {
        best = s[i];
        best_i = i;
      }
    }
    res.in_c2[best_i] = 1;
  }

  // Mean over C1 and C2.
  double sum[kMaxCols];
  for (std::size_t c = 0; c < d; ++c) sum[c] = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (res.in_c1[i] && res.in_c2[i]) {
      for (std::size_t c = 0; c < d; ++c) sum[c] += G[i][c];
      ++count;
    }
  }
  if (count == 0) {
    res.empty = true;
    res.aggregate.assign(med, med + d);
    return;
  }
  res.empty = false;
  for (std::size_t c = 0; c < d; ++c) sum[c] /= count;
  res.aggregate.assign(sum, sum + d);
}

inline ReferenceResult ReferenceAggregate(
    const std::vector<std::vector<double>>& G, double beta, double T) {
  ReferenceResult res;
  ReferenceAggregate(G, beta, T, res);
  return res;
}

}  // namespace brsgd_oracle
