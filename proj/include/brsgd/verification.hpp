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

// Empirical checks of the guarantees behind BrSGD:
//
//  * CheckLemma1 searches adversarial placements of the Byzantine values in
//    one dimension and tests |A - mu| <= t + 3 beta s with T = s, where t
//    bounds the honest-mean deviation and s the largest honest deviation.
//    The bound is treated as a falsifiable hypothesis: violations come back
//    as witnesses, they are not swallowed.
//  * CheckContraction measures per-round ratios |w^{t+1} - w*| / |w^t - w*|
//    above the statistical floor and compares them to 1 - lambda_F /
//    (G_F + lambda_F).
//  * GradientFdCheck compares analytic gradients against central finite
//    differences.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "brsgd/aggregation.hpp"
#include "brsgd/errors.hpp"
#include "brsgd/gradient_set.hpp"
#include "brsgd/rng.hpp"
#include "brsgd/simcluster.hpp"
#include "brsgd/tasks.hpp"

namespace brsgd {

// Where the Byzantine rows sit in the canonical worker order. Constraint 2
// breaks score ties by index, so placement matters.
enum class Placement { kByzantineFirst, kByzantineLast };

struct LemmaScenario {
  std::vector<double> honest;
  double mu = 0.0;
  std::size_t byzantine_count = 0;
  double beta = 0.5;
  // Informational; byzantine_count is authoritative.
  double alpha = 0.0;

  std::size_t m() const { return honest.size() + byzantine_count; }

  // |mean(honest) - mu|.
  double t() const {
    const double mean = std::accumulate(honest.begin(), honest.end(), 0.0) /
                        static_cast<double>(honest.size());
    return std::abs(mean - mu);
  }

  // max |g_i - mu| over honest values; also the threshold T.
  double s() const {
    double worst = 0.0;
    for (double v : honest) worst = std::max(worst, std::abs(v - mu));
    return worst;
  }

  double bound() const { return t() + 3.0 * beta * s(); }
};

struct Lemma1Witness {
  std::vector<double> adversary;
  Placement placement = Placement::kByzantineFirst;
  double aggregate = 0.0;
  double error = 0.0;
  bool fallback = false;
};

struct Lemma1Report {
  LemmaScenario scenario;
  std::size_t trials = 0;
  double bound = 0.0;
  double worst_error = 0.0;
  Lemma1Witness worst;
  std::size_t violations = 0;
  std::size_t fallbacks = 0;
  // Violating placements, worst first, at most kMaxWitnesses of them.
  std::vector<Lemma1Witness> witnesses;

  static constexpr std::size_t kMaxWitnesses = 8;

  bool holds() const { return violations == 0; }
};

class BoundViolated : public Error {
 public:
  explicit BoundViolated(Lemma1Report report)
      : Error("aggregation error " + std::to_string(report.worst_error) +
              " exceeds t + 3 beta s = " + std::to_string(report.bound)),
        report_(std::move(report)) {}
  const Lemma1Report& report() const { return report_; }

 private:
  Lemma1Report report_;
};

inline constexpr double kLemmaSlack = 1e-9;

// Rows of the one-dimensional aggregation input for one placement.
inline GradientSet LemmaInput(const LemmaScenario& scn,
                              std::span<const double> adversary,
                              Placement placement) {
  GradientSet g(scn.m(), 1);
  std::size_t r = 0;
  auto put = [&](std::span<const double> values) {
    for (double v : values) g(r++, 0) = v;
  };
  if (placement == Placement::kByzantineFirst) {
    put(adversary);
    put(scn.honest);
  } else {
    put(scn.honest);
    put(adversary);
  }
  return g;
}

inline Lemma1Witness EvaluateLemmaPlacement(const LemmaScenario& scn,
                                            std::span<const double> adversary,
                                            Placement placement) {
  AggregatorConfig cfg;
  cfg.beta = scn.beta;
  cfg.threshold = scn.s();
  const AggregationOutcome out =
      BrsgdAggregateOrMedian(LemmaInput(scn, adversary, placement), cfg);
  Lemma1Witness w;
  w.adversary.assign(adversary.begin(), adversary.end());
  w.placement = placement;
  w.aggregate = out.gradient[0];
  w.error = std::abs(out.gradient[0] - scn.mu);
  w.fallback = out.fallback;
  return w;
}

// Runs `trials` adversarial placements. The first part of the budget walks
// a deterministic grid with every Byzantine value equal (over [mu - 10s,
// mu + 10s] plus the Constraint-1 edges mu +- s, mu +- 2s, mu +- 3s); the
// rest draws independent values, half of them concentrated on [mu - 3s,
// mu + 3s] where Constraint 1 cannot reject them. Placements alternate
// between Byzantine-first and Byzantine-last.
inline Lemma1Report CheckLemma1(const LemmaScenario& scn, std::size_t trials,
                                std::uint64_t seed = 0) {
  if (scn.honest.empty()) throw InvalidArgument("scenario needs honest values");
  if (!(scn.beta > 0.0 && scn.beta <= 0.5)) {
    throw InvalidArgument("scenario beta must lie in (0, 1/2]");
  }
  Lemma1Report report;
  report.scenario = scn;
  report.trials = trials;
  report.bound = scn.bound();
  const double s = scn.s();
  // A zero spread still gets a nonzero search window.
  const double span = s > 0.0 ? s : 1.0;
  const std::size_t b = scn.byzantine_count;

  std::vector<double> anchors;
  for (double k : {1.0, 2.0, 3.0}) {
    anchors.push_back(scn.mu + k * span);
    anchors.push_back(scn.mu - k * span);
  }
  anchors.push_back(scn.mu);
  const std::size_t grid_trials = trials / 2;
  const std::size_t grid_points =
      grid_trials / 2 > anchors.size() ? grid_trials / 2 - anchors.size() : 0;
  std::vector<double> grid = anchors;
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double frac = grid_points == 1
                            ? 0.5
                            : static_cast<double>(k) /
                                  static_cast<double>(grid_points - 1);
    grid.push_back(scn.mu - 10.0 * span + 20.0 * span * frac);
  }

  Engine rng = MakeEngine(seed, Stream::kLemmaTrials);
  std::uniform_real_distribution<double> wide(scn.mu - 10.0 * span,
                                              scn.mu + 10.0 * span);
  std::uniform_real_distribution<double> near(scn.mu - 3.0 * span,
                                              scn.mu + 3.0 * span);
  std::vector<double> adversary(b);

  bool have_worst = false;
  auto record = [&](Lemma1Witness w) {
    if (w.fallback) ++report.fallbacks;
    if (!have_worst || w.error > report.worst_error) {
      report.worst_error = w.error;
      report.worst = w;
      have_worst = true;
    }
    if (w.error > report.bound + kLemmaSlack) {
      ++report.violations;
      report.witnesses.push_back(std::move(w));
      std::sort(report.witnesses.begin(), report.witnesses.end(),
                [](const Lemma1Witness& a, const Lemma1Witness& c) {
                  return a.error > c.error;
                });
      if (report.witnesses.size() > Lemma1Report::kMaxWitnesses) {
        report.witnesses.pop_back();
      }
    }
  };

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const Placement placement =
        trial % 2 == 0 ? Placement::kByzantineFirst : Placement::kByzantineLast;
    if (trial < grid_trials) {
      const double v = grid[(trial / 2) % grid.size()];
      std::fill(adversary.begin(), adversary.end(), v);
    } else if (trial % 4 < 2) {
      for (double& v : adversary) v = near(rng);
    } else {
      for (double& v : adversary) v = wide(rng);
    }
    record(EvaluateLemmaPlacement(scn, adversary, placement));
  }
  return report;
}

inline void RequireLemma1(const Lemma1Report& report) {
  if (!report.holds()) throw BoundViolated(report);
}

// Honest values drawn i.i.d. from a Laplace law centred at mu, a
// sub-exponential family.
inline LemmaScenario MakeLaplaceScenario(std::size_t m, double alpha,
                                         double beta, std::uint64_t seed,
                                         double mu = 0.0, double scale = 1.0) {
  LemmaScenario scn;
  scn.mu = mu;
  scn.alpha = alpha;
  scn.beta = beta;
  scn.byzantine_count = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(m) + 1e-9));
  Engine rng = MakeEngine(seed, Stream::kLemmaTrials, {m, scn.byzantine_count});
  std::exponential_distribution<double> expo(1.0 / scale);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t i = scn.byzantine_count; i < m; ++i) {
    const double mag = expo(rng);
    scn.honest.push_back(mu + (sign(rng) ? mag : -mag));
  }
  return scn;
}

// Honest values alternating mu + s, mu - s.
inline LemmaScenario MakeAlternatingScenario(std::size_t m, double alpha,
                                             double beta, double s,
                                             double mu = 0.0) {
  LemmaScenario scn;
  scn.mu = mu;
  scn.alpha = alpha;
  scn.beta = beta;
  scn.byzantine_count = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(m) + 1e-9));
  for (std::size_t i = scn.byzantine_count; i < m; ++i) {
    scn.honest.push_back(i % 2 == 0 ? mu + s : mu - s);
  }
  return scn;
}

// The default grid: m in {4, 10, 20}, alpha in {0.1, 0.2, 0.4},
// beta in {alpha + 0.05, 0.5}.
inline std::vector<LemmaScenario> DefaultLemmaScenarios(std::uint64_t seed = 0) {
  std::vector<LemmaScenario> out;
  for (std::size_t m : {4, 10, 20}) {
    for (double alpha : {0.1, 0.2, 0.4}) {
      for (double beta : {alpha + 0.05, 0.5}) {
        out.push_back(MakeLaplaceScenario(m, alpha, beta, seed));
      }
    }
  }
  return out;
}

// Per-coordinate form in d dimensions: honest rows with per-coordinate
// mean deviation t_c and l1 spread S = max_i |g_i - mu|_1, threshold T = S.
// Checks |A_c - mu_c| <= t_c + 3 beta S on every coordinate.
struct CoordinateLemmaReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  bool holds() const { return violations == 0; }
};

inline CoordinateLemmaReport CheckLemma1Coordinatewise(
    const std::vector<Vector>& honest, std::span<const double> mu,
    std::size_t byzantine_count, double beta, std::size_t trials,
    std::uint64_t seed = 0) {
  if (honest.empty()) throw InvalidArgument("need honest rows");
  const std::size_t d = mu.size();
  const std::size_t m = honest.size() + byzantine_count;
  Vector t(d, 0.0);
  double spread = 0.0;
  for (const auto& row : honest) {
    double l1 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      t[c] += row[c];
      l1 += std::abs(row[c] - mu[c]);
    }
    spread = std::max(spread, l1);
  }
  for (std::size_t c = 0; c < d; ++c) {
    t[c] = std::abs(t[c] / static_cast<double>(honest.size()) - mu[c]);
  }
  AggregatorConfig cfg;
  cfg.beta = beta;
  cfg.threshold = spread;
  const double span = spread > 0.0 ? spread : 1.0;

  Engine rng = MakeEngine(seed, Stream::kLemmaTrials, {m, d});
  std::uniform_real_distribution<double> near(-3.0 * span, 3.0 * span);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CoordinateLemmaReport report;
  report.trials = trials;
  GradientSet g(m, d);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const bool first = trial % 2 == 0;
    const std::size_t offset = first ? byzantine_count : 0;
    for (std::size_t i = 0; i < honest.size(); ++i) g.set_row(offset + i, honest[i]);
    // Adversaries share one direction so they reinforce each other; the
    // perturbation is scaled to straddle the Constraint-1 radius.
    Vector dir(d);
    for (double& v : dir) v = near(rng);
    double l1 = 0.0;
    for (double v : dir) l1 += std::abs(v);
    const double radius = unit(rng) * 3.0 * span;
    for (std::size_t k = 0; k < byzantine_count; ++k) {
      const std::size_t r = first ? k : honest.size() + k;
      for (std::size_t c = 0; c < d; ++c) {
        g(r, c) = mu[c] + (l1 > 0 ? dir[c] / l1 * radius : 0.0);
      }
    }
    const AggregationOutcome out = BrsgdAggregateOrMedian(g, cfg);
    bool violated = false;
    for (std::size_t c = 0; c < d; ++c) {
      const double excess =
          std::abs(out.gradient[c] - mu[c]) - (t[c] + 3.0 * beta * spread);
      report.worst_excess = std::max(report.worst_excess, excess);
      if (excess > kLemmaSlack) violated = true;
    }
    if (violated) ++report.violations;
  }
  return report;
}

struct ConvergenceReport {
  // Ratios |w^{t+1} - w*| / |w^t - w*| for rounds above the plateau.
  std::vector<double> factors;
  double theoretical_factor = 0.0;
  // Mean distance over the last (up to) ten rounds.
  double plateau_distance = 0.0;
  double plateau_threshold = 0.0;
  // Delta-hat solving plateau = 2 Delta / lambda_F.
  double delta_estimate = 0.0;
  double max_factor = 0.0;
  bool passed = true;
};

inline constexpr double kPlateauMultiple = 5.0;

// `distances` holds |w^t - w*| for t = 0..T.
inline ConvergenceReport CheckContraction(std::span<const double> distances,
                                          double lambda_f, double g_f,
                                          double tolerance = 1e-9) {
  if (distances.size() < 2) {
    throw TraceTooShort("contraction check needs at least one round");
  }
  ConvergenceReport report;
  report.theoretical_factor = 1.0 - lambda_f / (g_f + lambda_f);
  const std::size_t tail = std::min<std::size_t>(10, distances.size() - 1);
  report.plateau_distance =
      std::accumulate(distances.end() - static_cast<std::ptrdiff_t>(tail),
                      distances.end(), 0.0) /
      static_cast<double>(tail);
  report.plateau_threshold = kPlateauMultiple * report.plateau_distance;
  report.delta_estimate = 0.5 * lambda_f * report.plateau_distance;
  for (std::size_t t = 0; t + 1 < distances.size(); ++t) {
    if (distances[t] <= report.plateau_threshold || distances[t] <= 0.0) continue;
    const double ratio = distances[t + 1] / distances[t];
    report.factors.push_back(ratio);
    report.max_factor = std::max(report.max_factor, ratio);
    if (!(ratio <= report.theoretical_factor + tolerance)) report.passed = false;
  }
  return report;
}

inline ConvergenceReport CheckContraction(const TrainingResult& result,
                                          const Task& task,
                                          double tolerance = 1e-9) {
  const std::vector<double> d = result.distances();
  return CheckContraction(d, task.strong_convexity(), task.smoothness(),
                          tolerance);
}

struct FdReport {
  double max_abs_error = 0.0;
  // max_c |fd_c - g_c| / max(max_c |g_c|, tiny).
  double max_rel_error = 0.0;
};

// Central differences of the population loss, or of `data`'s local loss
// when given.
inline FdReport GradientFdCheck(const Task& task, std::span<const double> w,
                                double h, const Dataset* data = nullptr) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  const Vector analytic =
      data ? task.Gradient(*data, w) : task.PopulationGradient(w);
  auto loss = [&](std::span<const double> x) {
    return data ? task.Loss(*data, x) : task.PopulationLoss(x);
  };
  Vector probe(w.begin(), w.end());
  FdReport report;
  double scale = 0.0;
  for (double v : analytic) scale = std::max(scale, std::abs(v));
  for (std::size_t c = 0; c < probe.size(); ++c) {
    const double keep = probe[c];
    probe[c] = keep + h;
    const double up = loss(probe);
    probe[c] = keep - h;
    const double down = loss(probe);
    probe[c] = keep;
    const double fd = (up - down) / (2.0 * h);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(fd - analytic[c]));
  }
  report.max_rel_error =
      report.max_abs_error / std::max(scale, std::numeric_limits<double>::min());
  return report;
}

}  // namespace brsgd
