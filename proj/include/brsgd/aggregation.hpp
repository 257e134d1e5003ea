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

// Gradient aggregation rules for synchronous distributed SGD.
//
// BrsgdAggregate combines two filters over the m x d gradient matrix:
//
//   Constraint 1  keep workers whose l1 distance to the coordinate-wise
//                 median is at most 2T.
//   Constraint 2  score every worker by the number of coordinates on which
//                 it sits on the majority side of the column mean, and keep
//                 the ceil(beta * m) highest scores.
//
// The aggregate is the mean of the rows that pass both. Everything here is a
// pure function of its arguments and runs in O(m d) apart from Krum, which
// is O(m^2 d).

#pragma once

#include <algorithm>
#include <iterator>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brsgd/errors.hpp"
#include "brsgd/gradient_set.hpp"

namespace brsgd {

enum class AggregatorKind { kBrsgd, kMean, kCoordMedian, kKrum };

inline std::string_view ToString(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::kBrsgd: return "brsgd";
    case AggregatorKind::kMean: return "mean";
    case AggregatorKind::kCoordMedian: return "median";
    case AggregatorKind::kKrum: return "krum";
  }
  return "unknown";
}

inline AggregatorKind ParseAggregatorKind(std::string_view name) {
  for (auto kind : {AggregatorKind::kBrsgd, AggregatorKind::kMean,
                    AggregatorKind::kCoordMedian, AggregatorKind::kKrum}) {
    if (ToString(kind) == name) return kind;
  }
  throw ConfigInvalid("unknown aggregator '" + std::string(name) + "'");
}

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::kBrsgd;
  // Fraction of workers kept by Constraint 2, in (0, 1/2].
  double beta = 0.5;
  // l1 threshold T; Constraint 1 admits distances up to 2T.
  double threshold = 0.0;
  // When set, the training harness replaces `threshold` with this quantile
  // of the round-0 l1 distances to the median. Ignored by the kernels.
  std::optional<double> threshold_quantile;
  // Byzantine count assumed by Krum. Unset means the harness picks it.
  std::optional<std::size_t> krum_f;

  void Validate(std::size_t m) const {
    if (!(beta > 0.0 && beta <= 0.5)) {
      throw ConfigInvalid("beta must lie in (0, 1/2], got " +
                          std::to_string(beta));
    }
    if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
      throw ConfigInvalid("threshold must be finite and >= 0");
    }
    if (threshold_quantile &&
        !(*threshold_quantile >= 0.0 && *threshold_quantile <= 1.0)) {
      throw ConfigInvalid("threshold quantile must lie in [0, 1]");
    }
    if (kind == AggregatorKind::kKrum && krum_f && 2 * *krum_f + 2 >= m) {
      throw InsufficientWorkers("krum requires 2f + 2 < m (f = " +
                                std::to_string(*krum_f) +
                                ", m = " + std::to_string(m) + ")");
    }
  }

  bool operator==(const AggregatorConfig&) const = default;
};

// Binary m x d matrix, row-major.
class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const noexcept {
    return bits_[r * cols_ + c];
  }
  std::uint8_t& operator()(std::size_t r, std::size_t c) noexcept {
    return bits_[r * cols_ + c];
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> bits_;
};

struct AggregationOutcome {
  Vector gradient;
  // Scores and constraint memberships exist only for BrSGD.
  std::optional<std::vector<std::size_t>> scores;
  std::optional<WorkerSet> c1;
  std::optional<WorkerSet> c2;
  // c1 ∩ c2 for BrSGD; all workers for Mean and CoordMedian; the selected
  // worker for Krum. Empty when BrSGD fell back to the median.
  WorkerSet survivors;
  bool fallback = false;
};

inline Vector ColumnMeans(const GradientSet& g) {
  Vector means(g.cols(), 0.0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < g.cols(); ++c) means[c] += row[c];
  }
  const auto m = static_cast<double>(g.rows());
  for (double& v : means) v /= m;
  return means;
}

// M(r, c) = 1 iff G(r, c) >= mean_c; a column whose count of ones is below
// m/2 is negated so the larger side of the mean holds the ones. A count of
// exactly m/2 is left alone.
inline ScoreMatrix MajorityScoreMatrix(const GradientSet& g) {
  const Vector means = ColumnMeans(g);
  ScoreMatrix scores(g.rows(), g.cols());
  std::vector<std::size_t> counter(g.cols(), 0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < g.cols(); ++c) {
      const std::uint8_t bit = row[c] >= means[c] ? 1 : 0;
      scores(r, c) = bit;
      counter[c] += bit;
    }
  }
  std::vector<std::uint8_t> flip(g.cols());
  for (std::size_t c = 0; c < g.cols(); ++c) {
    flip[c] = 2 * counter[c] < g.rows() ? 1 : 0;
  }
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) scores(r, c) ^= flip[c];
  }
  return scores;
}

inline std::vector<std::size_t> WorkerScores(const ScoreMatrix& m) {
  std::vector<std::size_t> s(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::size_t sum = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) sum += m(r, c);
    s[r] = sum;
  }
  return s;
}

namespace detail {

// Below this size a full sort beats the selection algorithms.
inline constexpr std::size_t kSmallSort = 16;

// Median of `buf`, reordering it. Even sizes average the two central order
// statistics.
inline double MedianInPlace(std::span<double> buf) {
  const std::size_t n = buf.size();
  const std::size_t mid = n / 2;
  if (n <= kSmallSort) {
    std::sort(buf.begin(), buf.end());
    return n % 2 == 1 ? buf[mid] : 0.5 * (buf[mid - 1] + buf[mid]);
  }
  std::nth_element(buf.begin(), buf.begin() + mid, buf.end());
  const double upper = buf[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(buf.begin(), buf.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

namespace detail {

// Column medians of g into `med`, with `buf` as gather space. Columns are
// gathered a cache line at a time to avoid strided reads.
inline void CoordinateMedianInto(const GradientSet& g, std::vector<double>& buf,
                                 Vector& med) {
  constexpr std::size_t kBlock = 8;
  const std::size_t m = g.rows();
  const std::size_t d = g.cols();
  med.resize(d);
  buf.resize(kBlock * m);
  for (std::size_t c0 = 0; c0 < d; c0 += kBlock) {
    const std::size_t width = std::min(kBlock, d - c0);
    for (std::size_t r = 0; r < m; ++r) {
      const auto row = g.row(r);
      for (std::size_t j = 0; j < width; ++j) buf[j * m + r] = row[c0 + j];
    }
    for (std::size_t j = 0; j < width; ++j) {
      med[c0 + j] = MedianInPlace(std::span<double>(buf.data() + j * m, m));
    }
  }
}

}  // namespace detail

inline Vector CoordinateMedian(const GradientSet& g) {
  std::vector<double> buf;
  Vector med;
  detail::CoordinateMedianInto(g, buf, med);
  return med;
}

inline Vector L1DistancesTo(const GradientSet& g,
                            std::span<const double> center) {
  Vector dist(g.rows(), 0.0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row(r);
    double sum = 0.0;
    for (std::size_t c = 0; c < g.cols(); ++c) sum += std::abs(row[c] - center[c]);
    dist[r] = sum;
  }
  return dist;
}

inline WorkerSet Constraint1Filter(const GradientSet& g,
                                   std::span<const double> median,
                                   double threshold) {
  const Vector dist = L1DistancesTo(g, median);
  WorkerSet kept;
  for (std::size_t r = 0; r < g.rows(); ++r) {
    if (dist[r] <= 2.0 * threshold) kept.push_back(r);
  }
  return kept;
}

// Number of workers kept by Constraint 2: ceil(beta * m), at least one.
inline std::size_t TopBetaCount(double beta, std::size_t m) {
  // The slack absorbs products such as 0.1 * 30 landing just above 3.
  const double raw = std::ceil(beta * static_cast<double>(m) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)),
                                 1, m);
}

namespace detail {

// Writes the k best-scored workers, ascending, into `kept`. Higher score
// first, lower index first among equal scores. Linear on average.
inline void TopScoresInto(std::span<const std::size_t> scores, std::size_t k,
                          WorkerSet& order, WorkerSet& kept) {
  const std::size_t m = scores.size();
  order.resize(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  if (m <= kSmallSort) {
    std::sort(order.begin(), order.end(), better);
  } else if (k < m) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.end(), better);
  }
  kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(kept.begin(), kept.end());
}

}  // namespace detail

// The ceil(beta * m) highest scores; ties at the cutoff go to the lower
// worker index.
inline WorkerSet Constraint2Filter(std::span<const std::size_t> scores,
                                   double beta) {
  WorkerSet order, kept;
  detail::TopScoresInto(scores, TopBetaCount(beta, scores.size()), order, kept);
  return kept;
}

inline WorkerSet Intersect(const WorkerSet& a, const WorkerSet& b) {
  WorkerSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

inline Vector MeanOfRows(const GradientSet& g, const WorkerSet& rows) {
  Vector out(g.cols(), 0.0);
  for (std::size_t r : rows) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < g.cols(); ++c) out[c] += row[c];
  }
  const auto count = static_cast<double>(rows.size());
  for (double& v : out) v /= count;
  return out;
}

// Scratch buffers for repeated BrSGD calls. Reusing one workspace and one
// outcome across calls avoids per-call allocations.
struct BrsgdWorkspace {
  Vector means;
  std::vector<std::size_t> counter;
  std::vector<std::uint8_t> flip;
  std::vector<double> column;
  Vector median;
  WorkerSet order;
};

// BrSGD with the median fallback, writing into `out`. The score matrix is
// folded into the per-worker sums rather than stored.
inline void BrsgdAggregateInto(const GradientSet& g, const AggregatorConfig& cfg,
                               BrsgdWorkspace& ws, AggregationOutcome& out) {
  cfg.Validate(g.rows());
  const std::size_t m = g.rows();
  const std::size_t d = g.cols();

  ws.means.assign(d, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < d; ++c) ws.means[c] += row[c];
  }
  for (double& v : ws.means) v /= static_cast<double>(m);

  ws.counter.assign(d, 0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < d; ++c) ws.counter[c] += row[c] >= ws.means[c];
  }
  ws.flip.resize(d);
  for (std::size_t c = 0; c < d; ++c) ws.flip[c] = 2 * ws.counter[c] < m ? 1 : 0;

  if (!out.scores) out.scores.emplace();
  auto& scores = *out.scores;
  scores.assign(m, 0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = g.row(r);
    std::size_t sum = 0;
    for (std::size_t c = 0; c < d; ++c) {
      sum += static_cast<std::size_t>((row[c] >= ws.means[c]) ^ ws.flip[c]);
    }
    scores[r] = sum;
  }

  detail::CoordinateMedianInto(g, ws.column, ws.median);
  if (!out.c1) out.c1.emplace();
  out.c1->clear();
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = g.row(r);
    double l1 = 0.0;
    for (std::size_t c = 0; c < d; ++c) l1 += std::abs(row[c] - ws.median[c]);
    if (l1 <= 2.0 * cfg.threshold) out.c1->push_back(r);
  }

  if (!out.c2) out.c2.emplace();
  detail::TopScoresInto(scores, TopBetaCount(cfg.beta, m), ws.order, *out.c2);

  out.survivors.clear();
  std::set_intersection(out.c1->begin(), out.c1->end(), out.c2->begin(),
                        out.c2->end(), std::back_inserter(out.survivors));
  out.fallback = out.survivors.empty();
  if (out.fallback) {
    out.gradient.assign(ws.median.begin(), ws.median.end());
    return;
  }
  out.gradient.assign(d, 0.0);
  for (std::size_t r : out.survivors) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < d; ++c) out.gradient[c] += row[c];
  }
  const auto count = static_cast<double>(out.survivors.size());
  for (double& v : out.gradient) v /= count;
}

// Throws EmptySurvivorSet when no worker passes both constraints.
inline AggregationOutcome BrsgdAggregate(const GradientSet& g,
                                         const AggregatorConfig& cfg) {
  BrsgdWorkspace ws;
  AggregationOutcome out;
  BrsgdAggregateInto(g, cfg, ws, out);
  if (out.fallback) throw EmptySurvivorSet();
  return out;
}

// As BrsgdAggregate, but an empty survivor set yields the coordinate median
// with `fallback` set instead of throwing.
inline AggregationOutcome BrsgdAggregateOrMedian(const GradientSet& g,
                                                 const AggregatorConfig& cfg) {
  BrsgdWorkspace ws;
  AggregationOutcome out;
  BrsgdAggregateInto(g, cfg, ws, out);
  return out;
}

inline Vector MeanAggregate(const GradientSet& g) { return ColumnMeans(g); }

// Index of the row with the smallest sum of squared l2 distances to its
// m - f - 2 nearest neighbours. Ties go to the lower index.
inline std::size_t KrumSelect(const GradientSet& g, std::size_t f) {
  const std::size_t m = g.rows();
  if (2 * f + 2 >= m) {
    throw InsufficientWorkers("krum requires 2f + 2 < m (f = " +
                              std::to_string(f) + ", m = " +
                              std::to_string(m) + ")");
  }
  std::vector<double> dist(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto a = g.row(i);
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto b = g.row(j);
      double sum = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) {
        const double diff = a[c] - b[c];
        sum += diff * diff;
      }
      dist[i * m + j] = sum;
      dist[j * m + i] = sum;
    }
  }
  const std::size_t neighbours = m - f - 2;
  std::vector<double> others;
  others.reserve(m - 1);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    others.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) others.push_back(dist[i * m + j]);
    }
    std::partial_sort(others.begin(), others.begin() + neighbours,
                      others.end());
    const double score =
        std::accumulate(others.begin(), others.begin() + neighbours, 0.0);
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

inline Vector KrumAggregate(const GradientSet& g, std::size_t f) {
  const auto row = g.row(KrumSelect(g, f));
  return Vector(row.begin(), row.end());
}

// Dispatches on cfg.kind. BrSGD falls back to the coordinate median when
// its survivor set is empty.
inline AggregationOutcome Aggregate(const GradientSet& g,
                                    const AggregatorConfig& cfg) {
  switch (cfg.kind) {
    case AggregatorKind::kBrsgd:
      return BrsgdAggregateOrMedian(g, cfg);
    case AggregatorKind::kMean:
      return {MeanAggregate(g), std::nullopt, std::nullopt, std::nullopt,
              AllWorkers(g.rows()), false};
    case AggregatorKind::kCoordMedian:
      return {CoordinateMedian(g), std::nullopt, std::nullopt, std::nullopt,
              AllWorkers(g.rows()), false};
    case AggregatorKind::kKrum: {
      const std::size_t pick = KrumSelect(g, cfg.krum_f.value_or(0));
      const auto row = g.row(pick);
      return {Vector(row.begin(), row.end()), std::nullopt, std::nullopt,
              std::nullopt, WorkerSet{pick}, false};
    }
  }
  throw InvalidArgument("unknown aggregator kind");
}

}  // namespace brsgd
