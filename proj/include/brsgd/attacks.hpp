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

// Byzantine behaviours applied to the rows of a GradientSet. Honest rows are
// never touched. Label inversion changes training data rather than uploaded
// vectors, so it is exposed as InvertLabels and is the identity here.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "brsgd/errors.hpp"
#include "brsgd/gradient_set.hpp"
#include "brsgd/rng.hpp"

namespace brsgd {

enum class AttackKind {
  kNone,
  kGaussian,
  kModelNegation,
  kGradientScale,
  kLabelInverse
};

inline std::string_view ToString(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kGaussian: return "gaussian";
    case AttackKind::kModelNegation: return "model_negation";
    case AttackKind::kGradientScale: return "gradient_scale";
    case AttackKind::kLabelInverse: return "label_inverse";
  }
  return "unknown";
}

inline AttackKind ParseAttackKind(std::string_view name) {
  for (auto kind : {AttackKind::kNone, AttackKind::kGaussian,
                    AttackKind::kModelNegation, AttackKind::kGradientScale,
                    AttackKind::kLabelInverse}) {
    if (ToString(kind) == name) return kind;
  }
  throw ConfigInvalid("unknown attack '" + std::string(name) + "'");
}

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  double noise_std = 200.0;
  double scale_const = 1e10;
  WorkerSet byzantine;
  std::uint64_t seed = 0;

  void Validate(std::size_t m) const {
    if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
      throw ConfigInvalid("noise_std must be positive");
    }
    if (scale_const == 0.0 || !std::isfinite(scale_const)) {
      throw ConfigInvalid("scale_const must be finite and nonzero");
    }
    if (!std::is_sorted(byzantine.begin(), byzantine.end()) ||
        std::adjacent_find(byzantine.begin(), byzantine.end()) !=
            byzantine.end()) {
      throw ConfigInvalid("byzantine set must be sorted and unique");
    }
    if (!byzantine.empty() && byzantine.back() >= m) {
      throw ConfigInvalid("byzantine worker id out of range");
    }
  }

  bool IsByzantine(std::size_t worker) const {
    return std::binary_search(byzantine.begin(), byzantine.end(), worker);
  }

  bool operator==(const AttackSpec&) const = default;
};

// floor(alpha * m) workers drawn uniformly without replacement.
inline WorkerSet SelectByzantine(std::size_t m, double alpha,
                                 std::uint64_t seed) {
  const auto count = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(m) + 1e-9));
  WorkerSet ids = AllWorkers(m);
  Engine rng = MakeEngine(seed, Stream::kByzantineSelection);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(count, m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Each Byzantine row becomes i.i.d. N(0, noise_std^2). The stream for a row
// depends on (seed, worker, round) only.
inline GradientSet GaussianAttack(const GradientSet& g, const AttackSpec& spec,
                                  std::uint64_t round = 0) {
  spec.Validate(g.rows());
  GradientSet out = g;
  for (std::size_t w : spec.byzantine) {
    Engine rng = MakeEngine(spec.seed, Stream::kAttack, {w, round});
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    for (double& v : out.row(w)) v = noise(rng);
  }
  return out;
}

// Each Byzantine row becomes -scale_const times the sum of the honest rows of
// the same round.
inline GradientSet ModelNegationAttack(const GradientSet& g,
                                       const AttackSpec& spec) {
  spec.Validate(g.rows());
  if (spec.byzantine.empty()) return g;
  if (spec.byzantine.size() == g.rows()) throw NoHonestWorkers();
  Vector honest_sum(g.cols(), 0.0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    if (spec.IsByzantine(r)) continue;
    const auto row = g.row(r);
    for (std::size_t c = 0; c < g.cols(); ++c) honest_sum[c] += row[c];
  }
  GradientSet out = g;
  for (std::size_t w : spec.byzantine) {
    auto row = out.row(w);
    for (std::size_t c = 0; c < g.cols(); ++c) {
      row[c] = -spec.scale_const * honest_sum[c];
    }
  }
  return out;
}

// Each Byzantine row is its own honest gradient times scale_const.
inline GradientSet GradientScaleAttack(const GradientSet& g,
                                       const AttackSpec& spec) {
  spec.Validate(g.rows());
  GradientSet out = g;
  for (std::size_t w : spec.byzantine) {
    for (double& v : out.row(w)) v *= spec.scale_const;
  }
  return out;
}

// y -> (classes - 1) - y; with 10 classes 1 <-> 8 and 7 <-> 2.
inline std::vector<int> InvertLabels(std::vector<int> labels, int classes = 10) {
  for (int& y : labels) {
    if (y < 0 || y >= classes) {
      throw LabelOutOfRange("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
    y = classes - 1 - y;
  }
  return labels;
}

// Rewrites the Byzantine rows according to spec.kind. `round` keys the
// Gaussian stream.
inline GradientSet ApplyAttack(const GradientSet& g, const AttackSpec& spec,
                               std::uint64_t round) {
  switch (spec.kind) {
    case AttackKind::kGaussian: return GaussianAttack(g, spec, round);
    case AttackKind::kModelNegation: return ModelNegationAttack(g, spec);
    case AttackKind::kGradientScale: return GradientScaleAttack(g, spec);
    case AttackKind::kNone:
    case AttackKind::kLabelInverse: return g;
  }
  return g;
}

}  // namespace brsgd
