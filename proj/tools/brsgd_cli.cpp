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

// brsgd run|sweep|bench|verify
//
// Exit codes: 0 success, 2 config error, 3 runtime failure or interruption.

#include <atomic>
#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "brsgd/brsgd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_stop{false};

extern "C" void HandleInterrupt(int) { g_stop.store(true); }

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::size_t> jobs;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "RNG seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--format", f.format, "csv or json (overrides the config)")
      ->check(CLI::IsMember({"csv", "json"}));
}

brsgd::ExperimentConfig LoadConfig(const CommonFlags& f, bool sweep) {
  brsgd::ExperimentConfig cfg = f.config_path.empty()
                                    ? brsgd::DefaultExperimentConfig()
                                    : brsgd::LoadExperimentConfig(f.config_path);
  if (f.seed) {
    cfg.training.seed = *f.seed;
    if (sweep) cfg.sweep.seeds = {*f.seed};
  }
  if (f.out) cfg.output_dir = *f.out;
  if (f.format) cfg.format = brsgd::ParseOutputFormat(*f.format);
  if (f.jobs) cfg.jobs = *f.jobs;
  brsgd::ValidateExperiment(cfg);
  return cfg;
}

int RunCommand(const CommonFlags& f) {
  const auto cfg = LoadConfig(f, false);
  const auto r = brsgd::RunSingle(cfg);
  std::cout << "final_loss=" << brsgd::FormatDouble(r.final_loss())
            << " final_distance=" << brsgd::FormatDouble(r.final_distance())
            << " fallbacks=" << r.fallbacks << " out=" << cfg.output_dir << "\n";
  return kExitOk;
}

int SweepCommand(const CommonFlags& f) {
  const auto cfg = LoadConfig(f, true);
  std::signal(SIGINT, HandleInterrupt);
  std::signal(SIGTERM, HandleInterrupt);
  const auto outcome = brsgd::RunExperiment(cfg, &g_stop);
  std::cout << outcome.rows.size() << "/" << outcome.total_cells
            << " cells written to " << cfg.output_dir << "\n";
  if (outcome.interrupted) {
    std::cerr << "sweep interrupted; partial summary flushed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int BenchCommand(const std::vector<std::size_t>& ms,
                 const std::vector<std::size_t>& ds, std::size_t reps,
                 std::uint64_t seed, const std::string& out) {
  const auto rows = brsgd::BenchAggregators(ms, ds, reps, seed);
  if (out.empty()) {
    brsgd::WriteBench(std::cout, rows);
  } else {
    std::ofstream file(out, std::ios::binary);
    brsgd::WriteBench(file, rows);
  }
  if (ms.size() >= 2) {
    for (std::size_t d : ds) {
      for (auto kind : {brsgd::AggregatorKind::kBrsgd, brsgd::AggregatorKind::kKrum}) {
        std::cerr << brsgd::ToString(kind) << " d=" << d << " slope_in_m="
                  << brsgd::FormatDouble(brsgd::SlopeInM(rows, kind, d)) << "\n";
      }
    }
  }
  return kExitOk;
}

int VerifyCommand(std::size_t trials, std::size_t contraction_seeds,
                  std::uint64_t seed, const std::string& out, bool strict) {
  brsgd::Json report;
  report["lemma1"] = brsgd::Json::array();
  bool lemma_holds = true;
  for (const auto& scn : brsgd::DefaultLemmaScenarios(seed)) {
    const auto r = brsgd::CheckLemma1(scn, trials, seed);
    lemma_holds = lemma_holds && r.holds();
    report["lemma1"].push_back(brsgd::ToJson(r));
  }
  report["lemma1_holds"] = lemma_holds;

  report["contraction"] = brsgd::Json::array();
  bool contraction_ok = true;
  for (std::uint64_t s = 0; s < contraction_seeds; ++s) {
    brsgd::TrainingConfig cfg;
    cfg.task.kind = brsgd::TaskKind::kQuadratic;
    cfg.task.quadratic.noise_std = 0.0;
    cfg.aggregator.kind = brsgd::AggregatorKind::kBrsgd;
    cfg.aggregator.threshold_quantile = 0.7;
    cfg.iterations = 100;
    cfg.seed = seed + s;
    const auto result = brsgd::RunTraining(cfg);
    const brsgd::Task task(cfg.task, cfg.seed);
    const auto c = brsgd::CheckContraction(result, task);
    contraction_ok = contraction_ok && c.passed;
    auto j = brsgd::ToJson(c);
    j["seed"] = cfg.seed;
    report["contraction"].push_back(j);
  }
  report["contraction_passed"] = contraction_ok;

  const std::string text = report.dump(2);
  if (out.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream(out, std::ios::binary) << text << "\n";
  }
  std::cerr << "lemma1 " << (lemma_holds ? "holds" : "VIOLATED (witnesses in report)")
            << ", contraction " << (contraction_ok ? "passed" : "FAILED") << "\n";
  if (!contraction_ok) return kExitRuntime;
  if (strict && !lemma_holds) return kExitRuntime;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-resilient SGD simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "single training run");
  AddCommon(run, run_flags);

  CommonFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "attack x alpha x aggregator x seed grid");
  AddCommon(sweep, sweep_flags);
  sweep->add_option("--jobs", sweep_flags.jobs, "parallel cells");

  std::vector<std::size_t> bench_m{10, 20, 40, 80, 160, 320};
  std::vector<std::size_t> bench_d{10000};
  std::size_t bench_reps = 5;
  std::uint64_t bench_seed = 0;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "aggregator timings");
  bench->add_option("--m", bench_m, "worker counts")->delimiter(',');
  bench->add_option("--d", bench_d, "dimensions")->delimiter(',');
  bench->add_option("--reps", bench_reps, "repetitions per point");
  bench->add_option("--seed", bench_seed, "RNG seed");
  bench->add_option("--out", bench_out, "CSV file (default stdout)");

  std::size_t verify_trials = 10000;
  std::size_t verify_seeds = 20;
  std::uint64_t verify_seed = 0;
  std::string verify_out;
  bool verify_strict = false;
  auto* verify = app.add_subcommand("verify", "lemma bound and contraction suites");
  verify->add_option("--trials", verify_trials, "adversarial trials per scenario");
  verify->add_option("--contraction-seeds", verify_seeds, "quadratic runs");
  verify->add_option("--seed", verify_seed, "RNG seed");
  verify->add_option("--out", verify_out, "JSON report file (default stdout)");
  verify->add_flag("--strict", verify_strict, "exit 3 when the lemma bound is violated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return RunCommand(run_flags);
    if (*sweep) return SweepCommand(sweep_flags);
    if (*bench) return BenchCommand(bench_m, bench_d, bench_reps, bench_seed, bench_out);
    if (*verify) {
      return VerifyCommand(verify_trials, verify_seeds, verify_seed, verify_out,
                           verify_strict);
    }
  } catch (const brsgd::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const brsgd::InsufficientWorkers& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
