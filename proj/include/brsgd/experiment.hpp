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

// Sweep runner and aggregator benchmark.
//
// Output layout under the output directory:
//   summary.csv | summary.json   one row per cell
//   cells/<attack>_a<alpha>_<aggregator>_s<seed>.csv | .json   per-round trace
//
// Trace columns:   round,distance_to_opt,loss,survivors,fallback,agg_nanos
// Summary columns: attack,alpha,aggregator,seed,final_loss,final_distance,
//                  test_accuracy
// Bench columns:   aggregator,m,d,nanos

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "brsgd/aggregation.hpp"
#include "brsgd/attacks.hpp"
#include "brsgd/config.hpp"
#include "brsgd/errors.hpp"
#include "brsgd/rng.hpp"
#include "brsgd/simcluster.hpp"

namespace brsgd {

inline constexpr const char* kTraceHeader =
    "round,distance_to_opt,loss,survivors,fallback,agg_nanos";
inline constexpr const char* kSummaryHeader =
    "attack,alpha,aggregator,seed,final_loss,final_distance,test_accuracy";
inline constexpr const char* kBenchHeader = "aggregator,m,d,nanos";

// Shortest decimal form that round-trips a double.
inline std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

struct SweepCell {
  AttackKind attack = AttackKind::kNone;
  double alpha = 0.0;
  AggregatorKind aggregator = AggregatorKind::kBrsgd;
  std::uint64_t seed = 0;
  TrainingConfig config;

  std::string Name() const {
    return std::string(ToString(attack)) + "_a" + FormatDouble(alpha) + "_" +
           std::string(ToString(aggregator)) + "_s" + std::to_string(seed);
  }
};

struct SummaryRow {
  AttackKind attack = AttackKind::kNone;
  double alpha = 0.0;
  AggregatorKind aggregator = AggregatorKind::kBrsgd;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double final_distance = 0.0;
  std::optional<double> test_accuracy;
};

// Cells in attack-major, then alpha, aggregator, seed order.
inline std::vector<SweepCell> ExpandSweep(const ExperimentConfig& cfg) {
  std::vector<SweepCell> cells;
  for (AttackKind attack : cfg.sweep.attacks) {
    for (double alpha : cfg.sweep.alphas) {
      for (AggregatorKind agg : cfg.sweep.aggregators) {
        for (std::uint64_t seed : cfg.sweep.seeds) {
          SweepCell cell{attack, alpha, agg, seed, cfg.training};
          cell.config.attack.kind = attack;
          cell.config.alpha = alpha;
          cell.config.aggregator.kind = agg;
          cell.config.seed = seed;
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  return cells;
}

inline SummaryRow Summarize(const SweepCell& cell, const TrainingResult& r) {
  return {cell.attack,      cell.alpha,         cell.aggregator,
          cell.seed,        r.final_loss(),     r.final_distance(),
          r.test_accuracy};
}

inline void WriteTrace(std::ostream& out, const TrainingResult& r,
                       OutputFormat format, bool record_timing) {
  if (format == OutputFormat::kCsv) {
    out << kTraceHeader << '\n';
    for (const auto& m : r.trace) {
      out << m.round << ',' << FormatDouble(m.distance) << ','
          << FormatDouble(m.loss) << ',' << m.survivors << ','
          << (m.fallback ? 1 : 0) << ',' << (record_timing ? m.agg_nanos : 0)
          << '\n';
    }
    return;
  }
  Json rows = Json::array();
  for (const auto& m : r.trace) {
    rows.push_back({{"round", m.round},
                    {"distance_to_opt", m.distance},
                    {"loss", m.loss},
                    {"survivors", m.survivors},
                    {"fallback", m.fallback},
                    {"agg_nanos", record_timing ? m.agg_nanos : 0}});
  }
  out << rows.dump(2) << '\n';
}

inline void WriteSummary(std::ostream& out, const std::vector<SummaryRow>& rows,
                         OutputFormat format) {
  if (format == OutputFormat::kCsv) {
    out << kSummaryHeader << '\n';
    for (const auto& r : rows) {
      out << ToString(r.attack) << ',' << FormatDouble(r.alpha) << ','
          << ToString(r.aggregator) << ',' << r.seed << ','
          << FormatDouble(r.final_loss) << ',' << FormatDouble(r.final_distance)
          << ',' << (r.test_accuracy ? FormatDouble(*r.test_accuracy) : "")
          << '\n';
    }
    return;
  }
  Json arr = Json::array();
  for (const auto& r : rows) {
    arr.push_back({{"attack", ToString(r.attack)},
                   {"alpha", r.alpha},
                   {"aggregator", ToString(r.aggregator)},
                   {"seed", r.seed},
                   {"final_loss", r.final_loss},
                   {"final_distance", r.final_distance},
                   {"test_accuracy", detail::OptionalToJson(r.test_accuracy)}});
  }
  out << arr.dump(2) << '\n';
}

inline std::string Extension(OutputFormat f) {
  return f == OutputFormat::kCsv ? ".csv" : ".json";
}

struct ExperimentOutcome {
  std::vector<SummaryRow> rows;  // completed cells, in sweep order
  std::size_t total_cells = 0;
  bool interrupted = false;
};

// Runs every cell, `jobs` at a time. Each cell's trace is written as soon as
// the cell finishes; the summary is written last and covers the cells that
// completed. Setting `*stop` stops new cells from starting.
inline ExperimentOutcome RunExperiment(const ExperimentConfig& cfg,
                                       const std::atomic<bool>* stop = nullptr) {
  ValidateExperiment(cfg);
  const std::vector<SweepCell> cells = ExpandSweep(cfg);
  for (const auto& cell : cells) cell.config.Validate();

  namespace fs = std::filesystem;
  const fs::path root(cfg.output_dir);
  fs::create_directories(root / "cells");

  std::vector<std::optional<SummaryRow>> done(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      if (stop && stop->load()) return;
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (error) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        const TrainingResult r = RunTraining(cells[i].config);
        std::ofstream out(root / "cells" / (cells[i].Name() + Extension(cfg.format)),
                          std::ios::binary);
        WriteTrace(out, r, cfg.format, cfg.record_timing);
        done[i] = Summarize(cells[i], r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentOutcome outcome;
  outcome.total_cells = cells.size();
  for (const auto& row : done) {
    if (row) outcome.rows.push_back(*row);
  }
  outcome.interrupted = outcome.rows.size() != cells.size();
  std::ofstream summary(root / ("summary" + Extension(cfg.format)), std::ios::binary);
  WriteSummary(summary, outcome.rows, cfg.format);
  if (error) std::rethrow_exception(error);
  return outcome;
}

// Single run of cfg.training; writes trace and a one-row summary.
inline TrainingResult RunSingle(const ExperimentConfig& cfg) {
  cfg.training.Validate();
  namespace fs = std::filesystem;
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  const TrainingResult r = RunTraining(cfg.training);
  {
    std::ofstream out(root / ("trace" + Extension(cfg.format)), std::ios::binary);
    WriteTrace(out, r, cfg.format, cfg.record_timing);
  }
  SweepCell cell{cfg.training.attack.kind, cfg.training.alpha,
                 cfg.training.aggregator.kind, cfg.training.seed, cfg.training};
  std::ofstream summary(root / ("summary" + Extension(cfg.format)), std::ios::binary);
  WriteSummary(summary, {Summarize(cell, r)}, cfg.format);
  return r;
}

struct BenchRow {
  AggregatorKind aggregator = AggregatorKind::kBrsgd;
  std::size_t m = 0;
  std::size_t d = 0;
  std::int64_t nanos = 0;
};

inline GradientSet RandomGradientSet(std::size_t m, std::size_t d,
                                     std::uint64_t seed) {
  GradientSet g(m, d);
  Engine rng = MakeEngine(seed, Stream::kBench, {m, d});
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (double& v : g.row(r)) v = unit(rng);
  }
  return g;
}

// Median wall-clock of `repetitions` calls per aggregator and (m, d) on
// random Gaussian inputs. BrSGD runs with beta = 1/2 and T at the 0.7
// quantile of the l1 distances; Krum assumes f = floor(m / 5).
inline std::vector<BenchRow> BenchAggregators(
    const std::vector<std::size_t>& ms, const std::vector<std::size_t>& ds,
    std::size_t repetitions, std::uint64_t seed = 0,
    const std::vector<AggregatorKind>& kinds = {AggregatorKind::kBrsgd,
                                                AggregatorKind::kMean,
                                                AggregatorKind::kCoordMedian,
                                                AggregatorKind::kKrum}) {
  if (ms.empty() || ds.empty() || kinds.empty()) {
    throw InvalidArgument("bench needs non-empty m, d and aggregator lists");
  }
  repetitions = std::max<std::size_t>(1, repetitions);
  std::vector<BenchRow> rows;
  for (std::size_t d : ds) {
    for (std::size_t m : ms) {
      const GradientSet g = RandomGradientSet(m, d, seed);
      for (AggregatorKind kind : kinds) {
        AggregatorConfig cfg;
        cfg.kind = kind;
        if (kind == AggregatorKind::kBrsgd) {
          cfg.threshold = Quantile(L1DistancesTo(g, CoordinateMedian(g)), 0.7);
        }
        if (kind == AggregatorKind::kKrum) {
          if (m < 3) continue;
          cfg.krum_f = std::min(m / 5, MaxKrumF(m));
        }
        std::vector<std::int64_t> samples;
        double sink = 0.0;
        for (std::size_t k = 0; k < repetitions; ++k) {
          const auto start = std::chrono::steady_clock::now();
          const AggregationOutcome out = Aggregate(g, cfg);
          const auto stop = std::chrono::steady_clock::now();
          sink += out.gradient[0];
          samples.push_back(
              std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start)
                  .count());
        }
        std::nth_element(samples.begin(), samples.begin() + samples.size() / 2,
                         samples.end());
        rows.push_back({kind, m, d, samples[samples.size() / 2]});
        // Keeps the aggregation from being optimised away.
        if (std::isnan(sink)) rows.back().nanos = -1;
      }
    }
  }
  return rows;
}

inline void WriteBench(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchHeader << '\n';
  for (const auto& r : rows) {
    out << ToString(r.aggregator) << ',' << r.m << ',' << r.d << ',' << r.nanos
        << '\n';
  }
}

// Least-squares slope of log(y) against log(x).
inline double LogLogSlope(const std::vector<double>& x,
                          const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgument("slope needs two or more paired points");
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// Slope of nanos against m for one aggregator at fixed d.
inline double SlopeInM(const std::vector<BenchRow>& rows, AggregatorKind kind,
                       std::size_t d) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.aggregator == kind && r.d == d) {
      x.push_back(static_cast<double>(r.m));
      y.push_back(static_cast<double>(std::max<std::int64_t>(r.nanos, 1)));
    }
  }
  return LogLogSlope(x, y);
}

}  // namespace brsgd
