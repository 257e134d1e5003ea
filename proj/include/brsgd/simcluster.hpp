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

// In-process simulation of synchronous master/worker training. Each round
// every worker uploads its local gradient, Byzantine rows are rewritten by
// the configured attack, the master aggregates and applies the projected
// update w <- P(w - eta * g). The update happens once at the master; the
// broadcast of the new parameters is implicit.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "brsgd/aggregation.hpp"
#include "brsgd/attacks.hpp"
#include "brsgd/errors.hpp"
#include "brsgd/gradient_set.hpp"
#include "brsgd/rng.hpp"
#include "brsgd/tasks.hpp"

namespace brsgd {

struct TrainingConfig {
  std::size_t m = 20;
  std::size_t n = 64;
  double alpha = 0.0;
  // Step size; 0 selects 1 / G_F of the task instance.
  double eta = 0.0;
  std::size_t iterations = 100;
  std::uint64_t seed = 1;
  // Diameter D of the parameter ball centred at the origin; 0 selects
  // 100 * max(|w*|, 1).
  double domain_diameter = 0.0;
  // Mini-batch size per worker and round; 0 uses the full local dataset.
  std::size_t batch_size = 0;
  TaskSpec task;
  // Only kind, noise_std and scale_const are read; the Byzantine set and the
  // attack seed are derived from alpha and seed.
  AttackSpec attack;
  AggregatorConfig aggregator;

  void Validate() const {
    if (m == 0 || n == 0) throw ConfigInvalid("m and n must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 0.5)) {
      throw ConfigInvalid("alpha must lie in [0, 1/2]");
    }
    if (!(eta >= 0.0) || !std::isfinite(eta)) {
      throw ConfigInvalid("eta must be finite and >= 0 (0 = 1/G_F)");
    }
    if (!(domain_diameter >= 0.0) || !std::isfinite(domain_diameter)) {
      throw ConfigInvalid("domain_diameter must be finite and >= 0");
    }
    if (batch_size > n) throw ConfigInvalid("batch_size exceeds n");
    task.Validate();
    AttackSpec probe = attack;
    probe.byzantine.clear();
    probe.Validate(m);
    if (attack.kind == AttackKind::kLabelInverse &&
        task.kind != TaskKind::kLogistic) {
      throw ConfigInvalid("label_inverse needs a labelled (logistic) task");
    }
    aggregator.Validate(m);
    if (aggregator.kind == AggregatorKind::kKrum && m < 3) {
      throw ConfigInvalid("krum needs m >= 3");
    }
  }

  bool operator==(const TrainingConfig&) const = default;
};

struct RoundMetrics {
  std::size_t round = 0;
  // |w^{t+1} - w*| and F(w^{t+1}) after the round's update.
  double distance = 0.0;
  double loss = 0.0;
  std::size_t survivors = 0;
  bool fallback = false;
  std::int64_t agg_nanos = 0;
};

struct TrainingResult {
  Vector initial_w;
  Vector final_w;
  double initial_distance = 0.0;
  double initial_loss = 0.0;
  std::vector<RoundMetrics> trace;
  WorkerSet byzantine;
  // Values actually used after resolving the automatic settings.
  double eta = 0.0;
  double threshold = 0.0;
  double domain_diameter = 0.0;
  std::optional<std::size_t> krum_f;
  std::size_t fallbacks = 0;
  std::optional<double> test_accuracy;

  double final_distance() const {
    return trace.empty() ? initial_distance : trace.back().distance;
  }
  double final_loss() const {
    return trace.empty() ? initial_loss : trace.back().loss;
  }
  // Distances |w^t - w*| for t = 0..T.
  std::vector<double> distances() const {
    std::vector<double> out{initial_distance};
    for (const auto& r : trace) out.push_back(r.distance);
    return out;
  }
};

// One dataset of n samples per worker. Workers listed in `inverted` get
// inverted labels.
inline std::vector<Dataset> PartitionData(const Task& task, std::size_t m,
                                          std::size_t n, std::uint64_t seed,
                                          const WorkerSet& inverted = {}) {
  std::vector<Dataset> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Engine rng = MakeEngine(seed, Stream::kWorkerData, {i});
    const bool invert =
        std::binary_search(inverted.begin(), inverted.end(), i);
    out.push_back(task.Sample(n, rng, invert));
  }
  return out;
}

// Full-batch local gradient.
inline Vector LocalGradient(const Task& task, const Dataset& data,
                            std::span<const double> w) {
  return task.Gradient(data, w);
}

// Linear-interpolated q-quantile.
inline double Quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline double L2Distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

// Projects onto the ball of diameter `diameter` centred at the origin.
inline void ProjectToBall(std::span<double> w, double diameter) {
  double sq = 0.0;
  for (double v : w) sq += v * v;
  const double radius = 0.5 * diameter;
  const double norm = std::sqrt(sq);
  if (norm > radius) {
    const double scale = radius / norm;
    for (double& v : w) v *= scale;
  }
}

// Largest Krum f that satisfies 2f + 2 < m.
inline std::size_t MaxKrumF(std::size_t m) { return m >= 3 ? (m - 3) / 2 : 0; }

inline TrainingResult RunTraining(const TrainingConfig& cfg) {
  cfg.Validate();
  const Task task(cfg.task, cfg.seed);
  const std::size_t d = task.dim();

  TrainingResult result;
  result.byzantine = SelectByzantine(cfg.m, cfg.alpha, cfg.seed);
  AttackSpec attack = cfg.attack;
  attack.byzantine = result.byzantine;
  attack.seed = cfg.seed;
  attack.Validate(cfg.m);

  const std::vector<Dataset> data = PartitionData(
      task, cfg.m, cfg.n, cfg.seed,
      attack.kind == AttackKind::kLabelInverse ? result.byzantine : WorkerSet{});

  AggregatorConfig agg = cfg.aggregator;
  if (agg.kind == AggregatorKind::kKrum && !agg.krum_f) {
    agg.krum_f = std::min(result.byzantine.size(), MaxKrumF(cfg.m));
  }
  result.krum_f = agg.krum_f;
  result.eta = cfg.eta > 0.0 ? cfg.eta : 1.0 / task.smoothness();
  const double w_star_norm = std::sqrt(std::inner_product(
      task.optimum().begin(), task.optimum().end(), task.optimum().begin(), 0.0));
  result.domain_diameter = cfg.domain_diameter > 0.0
                               ? cfg.domain_diameter
                               : 100.0 * std::max(w_star_norm, 1.0);

  Vector w(d, 0.0);
  result.initial_w = w;
  result.initial_distance = L2Distance(w, task.optimum());
  result.initial_loss = task.PopulationLoss(w);
  result.threshold = agg.threshold;

  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < cfg.n;
  std::vector<std::size_t> batch;
  std::vector<std::size_t> all_samples(cfg.n);
  std::iota(all_samples.begin(), all_samples.end(), std::size_t{0});

  GradientSet uploads(cfg.m, d);
  result.trace.reserve(cfg.iterations);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    for (std::size_t i = 0; i < cfg.m; ++i) {
      if (minibatch) {
        batch = all_samples;
        Engine rng = MakeEngine(cfg.seed, Stream::kMinibatch, {i, t});
        std::shuffle(batch.begin(), batch.end(), rng);
        batch.resize(cfg.batch_size);
        uploads.set_row(i, task.Gradient(data[i], w, batch));
      } else {
        uploads.set_row(i, LocalGradient(task, data[i], w));
      }
    }
    const GradientSet attacked = ApplyAttack(uploads, attack, t);
    if (!attacked.all_finite()) {
      throw Error("non-finite gradient in round " + std::to_string(t));
    }
    if (t == 0 && agg.kind == AggregatorKind::kBrsgd && agg.threshold_quantile) {
      agg.threshold = Quantile(L1DistancesTo(attacked, CoordinateMedian(attacked)),
                               *agg.threshold_quantile);
      result.threshold = agg.threshold;
    }

    const auto start = std::chrono::steady_clock::now();
    const AggregationOutcome outcome = Aggregate(attacked, agg);
    const auto stop = std::chrono::steady_clock::now();

    for (std::size_t c = 0; c < d; ++c) w[c] -= result.eta * outcome.gradient[c];
    ProjectToBall(w, result.domain_diameter);

    RoundMetrics metrics;
    metrics.round = t;
    metrics.distance = L2Distance(w, task.optimum());
    metrics.loss = task.PopulationLoss(w);
    metrics.fallback = outcome.fallback;
    // A fallback round aggregates every worker through the median.
    metrics.survivors = outcome.fallback ? cfg.m : outcome.survivors.size();
    metrics.agg_nanos =
        std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();
    if (outcome.fallback) ++result.fallbacks;
    result.trace.push_back(metrics);
  }
  result.final_w = w;
  result.test_accuracy = task.TestAccuracy(w);
  return result;
}

}  // namespace brsgd
