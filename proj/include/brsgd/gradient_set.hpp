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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "brsgd/errors.hpp"

namespace brsgd {

using Vector = std::vector<double>;

// Sorted, duplicate-free list of worker indices.
using WorkerSet = std::vector<std::size_t>;

// The m x d matrix of gradients uploaded in one round. Row i is the
// flattened gradient of worker i; row order is the canonical worker order
// that every per-worker output (scores, memberships) indexes against.
class GradientSet {
 public:
  GradientSet(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw InvalidArgument("GradientSet needs m >= 1 and d >= 1");
    }
  }

  GradientSet(std::initializer_list<std::initializer_list<double>> rows)
      : GradientSet(Build(rows)) {}

  static GradientSet FromRows(const std::vector<Vector>& rows) {
    if (rows.empty()) throw InvalidArgument("GradientSet needs m >= 1");
    GradientSet g(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) g.set_row(i, rows[i]);
    return g;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const noexcept {
    return values_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) noexcept {
    return values_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  void set_row(std::size_t r, std::span<const double> v) {
    if (v.size() != cols_) {
      throw InvalidArgument("row length " + std::to_string(v.size()) +
                            " does not match d = " + std::to_string(cols_));
    }
    std::copy(v.begin(), v.end(), row(r).begin());
  }

  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const GradientSet&) const = default;

 private:
  static GradientSet Build(
      std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw InvalidArgument("GradientSet needs m >= 1");
    GradientSet g(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
      g.set_row(r++, std::span<const double>(row.begin(), row.size()));
    }
    return g;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

inline WorkerSet AllWorkers(std::size_t m) {
  WorkerSet out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = i;
  return out;
}

}  // namespace brsgd
