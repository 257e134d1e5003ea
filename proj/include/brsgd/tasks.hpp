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

// Synthetic learning tasks with a known population optimum.
//
// Quadratic: l(w; xi) = 1/2 (w - w*)' A (w - w*) + xi' (w - w*), with A
//   diagonal and its spectrum spread evenly over [lambda_F, G_F] and
//   xi ~ N(0, noise_std^2 I). The population loss is the noise-free part.
// Logistic: multinomial logistic regression with an L2 penalty on Gaussian
//   blob data. The population loss is the mean loss over a large reference
//   sample; its minimiser is found by damped Newton iterations.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brsgd/attacks.hpp"
#include "brsgd/errors.hpp"
#include "brsgd/gradient_set.hpp"
#include "brsgd/rng.hpp"

namespace brsgd {

enum class TaskKind { kQuadratic, kLogistic };

inline std::string_view ToString(TaskKind kind) {
  return kind == TaskKind::kQuadratic ? "quadratic" : "logistic";
}

inline TaskKind ParseTaskKind(std::string_view name) {
  if (name == "quadratic") return TaskKind::kQuadratic;
  if (name == "logistic") return TaskKind::kLogistic;
  throw ConfigInvalid("unknown task '" + std::string(name) + "'");
}

struct QuadraticParams {
  std::size_t dim = 20;
  double lambda_min = 1.0;   // lambda_F
  double lambda_max = 10.0;  // G_F
  double noise_std = 1.0;
  // Coordinates of w* are drawn from N(0, optimum_scale^2).
  double optimum_scale = 1.0;

  bool operator==(const QuadraticParams&) const = default;
};

struct LogisticParams {
  int classes = 10;
  std::size_t features = 10;
  // Class centres are drawn from N(0, separation^2 I).
  double separation = 1.5;
  double l2 = 0.01;
  std::size_t reference_samples = 2000;
  std::size_t test_samples = 2000;

  bool operator==(const LogisticParams&) const = default;
};

struct TaskSpec {
  TaskKind kind = TaskKind::kQuadratic;
  QuadraticParams quadratic;
  LogisticParams logistic;

  void Validate() const {
    if (kind == TaskKind::kQuadratic) {
      const auto& q = quadratic;
      if (q.dim == 0) throw ConfigInvalid("quadratic dim must be >= 1");
      if (!(q.lambda_min > 0.0) || !(q.lambda_min <= q.lambda_max)) {
        throw ConfigInvalid("quadratic needs 0 < lambda_min <= lambda_max");
      }
      if (!(q.noise_std >= 0.0)) throw ConfigInvalid("noise_std must be >= 0");
      if (!(q.optimum_scale >= 0.0)) {
        throw ConfigInvalid("optimum_scale must be >= 0");
      }
    } else {
      const auto& l = logistic;
      if (l.classes < 2) throw ConfigInvalid("logistic needs >= 2 classes");
      if (l.features == 0) throw ConfigInvalid("logistic needs >= 1 feature");
      if (!(l.l2 > 0.0)) throw ConfigInvalid("logistic l2 must be > 0");
      if (!(l.separation >= 0.0)) throw ConfigInvalid("separation must be >= 0");
      if (l.reference_samples == 0 || l.test_samples == 0) {
        throw ConfigInvalid("reference and test samples must be >= 1");
      }
    }
  }

  std::size_t dim() const {
    return kind == TaskKind::kQuadratic
               ? quadratic.dim
               : static_cast<std::size_t>(logistic.classes) *
                     (logistic.features + 1);
  }

  bool operator==(const TaskSpec&) const = default;
};

// One worker's local samples. Quadratic samples are noise vectors (n x d);
// logistic samples are feature rows (n x p) plus labels.
struct Dataset {
  std::size_t n = 0;
  std::size_t width = 0;
  std::vector<double> x;
  std::vector<int> labels;

  std::span<const double> sample(std::size_t j) const {
    return {x.data() + j * width, width};
  }
  bool operator==(const Dataset&) const = default;
};

// A task instance drawn from a TaskSpec and seed: fixes w*, the curvature or
// class centres, and the reference/test samples.
class Task {
 public:
  Task(const TaskSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.Validate();
    Engine rng = MakeEngine(seed, Stream::kTaskInstance);
    if (spec_.kind == TaskKind::kQuadratic) {
      InitQuadratic(rng);
    } else {
      InitLogistic(rng);
    }
  }

  const TaskSpec& spec() const { return spec_; }
  TaskKind kind() const { return spec_.kind; }
  std::size_t dim() const { return spec_.dim(); }
  const Vector& optimum() const { return optimum_; }
  // lambda_F and G_F.
  double strong_convexity() const { return strong_convexity_; }
  double smoothness() const { return smoothness_; }
  const Vector& curvature() const { return curvature_; }

  // n i.i.d. samples; labels are inverted when `invert_labels` is set.
  Dataset Sample(std::size_t n, Engine& rng, bool invert_labels = false) const {
    Dataset data;
    data.n = n;
    if (spec_.kind == TaskKind::kQuadratic) {
      data.width = dim();
      data.x.assign(n * data.width, 0.0);
      if (spec_.quadratic.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, spec_.quadratic.noise_std);
        for (double& v : data.x) v = noise(rng);
      }
      return data;
    }
    const auto& lp = spec_.logistic;
    data.width = lp.features;
    data.x.resize(n * data.width);
    data.labels.resize(n);
    std::uniform_int_distribution<int> label(0, lp.classes - 1);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
      const int y = label(rng);
      data.labels[j] = y;
      for (std::size_t f = 0; f < lp.features; ++f) {
        data.x[j * lp.features + f] = centres_[y * lp.features + f] + unit(rng);
      }
    }
    if (invert_labels) data.labels = InvertLabels(std::move(data.labels), lp.classes);
    return data;
  }

  // Mean loss of the samples in `batch` (all samples when empty).
  double Loss(const Dataset& data, std::span<const double> w,
              std::span<const std::size_t> batch = {}) const {
    double total = 0.0;
    const std::size_t count = batch.empty() ? data.n : batch.size();
    if (count == 0) return 0.0;
    if (spec_.kind == TaskKind::kQuadratic) {
      const double base = QuadraticPopulationLoss(w);
      for (std::size_t k = 0; k < count; ++k) {
        const auto xi = data.sample(batch.empty() ? k : batch[k]);
        for (std::size_t c = 0; c < dim(); ++c) {
          total += xi[c] * (w[c] - optimum_[c]);
        }
      }
      return base + total / static_cast<double>(count);
    }
    std::vector<double> probs(spec_.logistic.classes);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = batch.empty() ? k : batch[k];
      total += SoftmaxLoss(w, data.sample(j), data.labels[j], probs);
    }
    return total / static_cast<double>(count) + Penalty(w);
  }

  // Exact gradient of Loss(data, ., batch) at w.
  Vector Gradient(const Dataset& data, std::span<const double> w,
                  std::span<const std::size_t> batch = {}) const {
    const std::size_t count = batch.empty() ? data.n : batch.size();
    Vector grad(dim(), 0.0);
    if (spec_.kind == TaskKind::kQuadratic) {
      for (std::size_t k = 0; k < count; ++k) {
        const auto xi = data.sample(batch.empty() ? k : batch[k]);
        for (std::size_t c = 0; c < dim(); ++c) grad[c] += xi[c];
      }
      const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
      for (std::size_t c = 0; c < dim(); ++c) {
        grad[c] = grad[c] * inv + curvature_[c] * (w[c] - optimum_[c]);
      }
      return grad;
    }
    const auto& lp = spec_.logistic;
    const std::size_t stride = lp.features + 1;
    std::vector<double> probs(lp.classes);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t j = batch.empty() ? k : batch[k];
      const auto x = data.sample(j);
      SoftmaxLoss(w, x, data.labels[j], probs);
      for (int cls = 0; cls < lp.classes; ++cls) {
        const double coef = probs[cls] - (cls == data.labels[j] ? 1.0 : 0.0);
        double* g = grad.data() + cls * stride;
        for (std::size_t f = 0; f < lp.features; ++f) g[f] += coef * x[f];
        g[lp.features] += coef;
      }
    }
    const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
    for (std::size_t c = 0; c < dim(); ++c) grad[c] = grad[c] * inv + lp.l2 * w[c];
    return grad;
  }

  double PopulationLoss(std::span<const double> w) const {
    if (spec_.kind == TaskKind::kQuadratic) return QuadraticPopulationLoss(w);
    return Loss(reference_, w);
  }

  Vector PopulationGradient(std::span<const double> w) const {
    if (spec_.kind == TaskKind::kQuadratic) {
      Vector grad(dim());
      for (std::size_t c = 0; c < dim(); ++c) {
        grad[c] = curvature_[c] * (w[c] - optimum_[c]);
      }
      return grad;
    }
    return Gradient(reference_, w);
  }

  // Held-out accuracy; only defined for the logistic task.
  std::optional<double> TestAccuracy(std::span<const double> w) const {
    if (spec_.kind != TaskKind::kLogistic) return std::nullopt;
    std::size_t correct = 0;
    std::vector<double> probs(spec_.logistic.classes);
    for (std::size_t j = 0; j < test_.n; ++j) {
      SoftmaxLoss(w, test_.sample(j), test_.labels[j], probs);
      const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
      if (best == test_.labels[j]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_.n);
  }

 private:
  double QuadraticPopulationLoss(std::span<const double> w) const {
    double sum = 0.0;
    for (std::size_t c = 0; c < dim(); ++c) {
      const double diff = w[c] - optimum_[c];
      sum += curvature_[c] * diff * diff;
    }
    return 0.5 * sum;
  }

  double Penalty(std::span<const double> w) const {
    double sq = 0.0;
    for (double v : w) sq += v * v;
    return 0.5 * spec_.logistic.l2 * sq;
  }

  // Cross-entropy of one sample; leaves softmax probabilities in `probs`.
  double SoftmaxLoss(std::span<const double> w, std::span<const double> x,
                     int label, std::vector<double>& probs) const {
    const auto& lp = spec_.logistic;
    const std::size_t stride = lp.features + 1;
    double top = -std::numeric_limits<double>::infinity();
    for (int cls = 0; cls < lp.classes; ++cls) {
      const double* row = w.data() + cls * stride;
      double z = row[lp.features];
      for (std::size_t f = 0; f < lp.features; ++f) z += row[f] * x[f];
      probs[cls] = z;
      top = std::max(top, z);
    }
    double norm = 0.0;
    for (double& p : probs) {
      p = std::exp(p - top);
      norm += p;
    }
    const double logit_y = std::log(probs[label] / norm);
    for (double& p : probs) p /= norm;
    return -logit_y;
  }

  void InitQuadratic(Engine& rng) {
    const auto& q = spec_.quadratic;
    curvature_.resize(q.dim);
    for (std::size_t c = 0; c < q.dim; ++c) {
      curvature_[c] = q.dim == 1 ? q.lambda_min
                                 : q.lambda_min + (q.lambda_max - q.lambda_min) *
                                                      static_cast<double>(c) /
                                                      static_cast<double>(q.dim - 1);
    }
    optimum_.resize(q.dim);
    std::normal_distribution<double> draw(0.0, 1.0);
    for (double& v : optimum_) v = q.optimum_scale * draw(rng);
    strong_convexity_ = q.lambda_min;
    smoothness_ = q.lambda_max;
  }

  void InitLogistic(Engine& rng) {
    const auto& lp = spec_.logistic;
    centres_.resize(static_cast<std::size_t>(lp.classes) * lp.features);
    std::normal_distribution<double> draw(0.0, lp.separation);
    for (double& v : centres_) v = draw(rng);
    reference_ = Sample(lp.reference_samples, rng);
    test_ = Sample(lp.test_samples, rng);

    // Softmax curvature is at most 1/2 times the second moment of [x, 1].
    const std::size_t stride = lp.features + 1;
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(stride, stride);
    Eigen::VectorXd xt(stride);
    for (std::size_t j = 0; j < reference_.n; ++j) {
      const auto x = reference_.sample(j);
      for (std::size_t f = 0; f < lp.features; ++f) xt[f] = x[f];
      xt[lp.features] = 1.0;
      moment.noalias() += xt * xt.transpose();
    }
    moment /= static_cast<double>(reference_.n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment);
    smoothness_ = 0.5 * eig.eigenvalues().maxCoeff() + lp.l2;
    strong_convexity_ = lp.l2;
    optimum_ = SolveLogisticOptimum();
  }

  Vector SolveLogisticOptimum() const {
    const auto& lp = spec_.logistic;
    const std::size_t stride = lp.features + 1;
    const std::size_t d = dim();
    const auto classes = static_cast<std::size_t>(lp.classes);
    Vector w(d, 0.0);
    std::vector<double> probs(lp.classes);
    Eigen::VectorXd xt(stride);
    for (int iter = 0; iter < 100; ++iter) {
      const Vector grad = PopulationGradient(w);
      Eigen::Map<const Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(d));
      if (g.norm() < 1e-11) break;
      Eigen::MatrixXd hess = lp.l2 * Eigen::MatrixXd::Identity(d, d);
      const double inv_n = 1.0 / static_cast<double>(reference_.n);
      for (std::size_t j = 0; j < reference_.n; ++j) {
        const auto x = reference_.sample(j);
        SoftmaxLoss(w, x, reference_.labels[j], probs);
        for (std::size_t f = 0; f < lp.features; ++f) xt[f] = x[f];
        xt[lp.features] = 1.0;
        const Eigen::MatrixXd outer = inv_n * xt * xt.transpose();
        for (std::size_t a = 0; a < classes; ++a) {
          for (std::size_t b = a; b < classes; ++b) {
            const double coef = (a == b ? probs[a] : 0.0) - probs[a] * probs[b];
            hess.block(a * stride, b * stride, stride, stride) += coef * outer;
          }
        }
      }
      const Eigen::VectorXd step =
          hess.selfadjointView<Eigen::Upper>().ldlt().solve(g);
      // Backtracking keeps the iterates monotone in the population loss.
      const double current = PopulationLoss(w);
      double scale = 1.0;
      Vector next(d);
      for (int k = 0; k < 40; ++k) {
        for (std::size_t c = 0; c < d; ++c) next[c] = w[c] - scale * step[c];
        if (PopulationLoss(next) <= current) break;
        scale *= 0.5;
      }
      w = next;
    }
    return w;
  }

  TaskSpec spec_;
  Vector optimum_;
  Vector curvature_;
  Vector centres_;
  Dataset reference_;
  Dataset test_;
  double strong_convexity_ = 0.0;
  double smoothness_ = 0.0;
};

}  // namespace brsgd
