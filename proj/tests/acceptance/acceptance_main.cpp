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

// Acceptance gate. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any criterion fails. Each line carries the measured runtime
// against its budget.
//
//   acceptance [--archive <path>] [--only <id>]...

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "brsgd/brsgd.hpp"
#include "oracle/algorithm2_reference.hpp"

namespace {

using namespace brsgd;
namespace fs = std::filesystem;

struct Verdict {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  // Runtime budget in seconds; 0 means none.
  double budget;
  std::function<Verdict()> run;
};

std::string Fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

// 1. Lemma bound over the default scenario grid.
Verdict LemmaSuite(const std::string& archive_path) {
  constexpr std::size_t kTrials = 10000;
  std::size_t holding = 0;
  std::size_t total = 0;
  double worst_ratio = 0.0;
  Json archive = Json::array();
  for (const auto& scn : DefaultLemmaScenarios(0)) {
    const Lemma1Report r = CheckLemma1(scn, kTrials, 0);
    ++total;
    worst_ratio = std::max(worst_ratio, r.worst_error / r.bound);
    if (r.holds()) {
      ++holding;
    } else {
      if (r.witnesses.empty()) return {false, "violation without a witness"};
      archive.push_back(ToJson(r));
    }
  }
  if (archive.empty()) {
    return {true, std::to_string(total) + "/" + std::to_string(total) +
                      " scenarios within t + 3 beta s; worst error/bound " +
                      Fmt(worst_ratio)};
  }
  {
    std::ofstream out(archive_path, std::ios::binary);
    out << archive.dump(2) << '\n';
    if (!out) return {false, "could not write witness archive " + archive_path};
  }
  // The archive must reproduce every violation it records.
  std::ifstream in(archive_path, std::ios::binary);
  const Json reread = Json::parse(in);
  std::size_t witnesses = 0;
  for (const Json& entry : reread) {
    const LemmaScenario scn = ScenarioFromJson(entry.at("scenario"));
    for (const Json& wj : entry.at("witnesses")) {
      const Lemma1Witness w = WitnessFromJson(wj);
      const Lemma1Witness replay = EvaluateLemmaPlacement(scn, w.adversary, w.placement);
      if (!(replay.error > scn.bound() + kLemmaSlack)) {
        return {false, "archived witness does not replay as a violation"};
      }
      ++witnesses;
    }
  }
  return {true, std::to_string(holding) + "/" + std::to_string(total) +
                    " scenarios within bound; " +
                    std::to_string(total - holding) +
                    " violate (worst error/bound " + Fmt(worst_ratio) + "), " +
                    std::to_string(witnesses) + " witnesses archived to " +
                    archive_path};
}

// 2. Exhaustive equivalence with the reference transcription.
//
// Both implementations treat columns independently apart from the l1 sum
// and the integer score sum, and with entries in {-1, 0, 1, 10} every l1
// partial sum is an exact multiple of 1/2. Permuting columns therefore
// permutes the output exactly, so for d = 3 and m >= 4 one representative
// per column multiset covers every ordering. The permutation property
// itself is checked on the side for both implementations.
class OracleSweep {
 public:
  static constexpr std::array<double, 4> kValues{-1.0, 0.0, 1.0, 10.0};
  static constexpr std::array<double, 3> kBetas{0.5, 0.4, 0.2};
  static constexpr std::array<double, 7> kThresholds{0.0, 0.5, 1.0, 2.0,
                                                     5.5, 11.0, 100.0};

  std::size_t checked = 0;
  std::size_t mismatches = 0;
  std::size_t fallbacks = 0;
  std::string first_mismatch;

  void Check(const GradientSet& g, double beta, double threshold) {
    const std::size_t m = g.rows();
    const std::size_t d = g.cols();
    rows_.resize(m);
    for (std::size_t r = 0; r < m; ++r) rows_[r].assign(g.row(r).begin(), g.row(r).end());
    cfg_.beta = beta;
    cfg_.threshold = threshold;
    BrsgdAggregateInto(g, cfg_, ws_, out_);
    brsgd_oracle::ReferenceAggregate(rows_, beta, threshold, ref_);
    ++checked;
    if (out_.fallback) ++fallbacks;
    bool same = out_.fallback == ref_.empty;
    for (std::size_t c = 0; c < d && same; ++c) {
      same = std::abs(out_.gradient[c] - ref_.aggregate[c]) <= 1e-12;
    }
    for (std::size_t r = 0; r < m && same; ++r) {
      same = static_cast<int>((*out_.scores)[r]) == ref_.scores[r];
    }
    if (same) {
      std::size_t k1 = 0, k2 = 0;
      for (std::size_t r = 0; r < m && same; ++r) {
        const bool in1 = k1 < out_.c1->size() && (*out_.c1)[k1] == r;
        const bool in2 = k2 < out_.c2->size() && (*out_.c2)[k2] == r;
        k1 += in1;
        k2 += in2;
        same = in1 == static_cast<bool>(ref_.in_c1[r]) &&
               in2 == static_cast<bool>(ref_.in_c2[r]);
      }
    }
    if (!same) {
      if (mismatches == 0) {
        std::ostringstream s;
        s << "m=" << m << " d=" << d << " beta=" << beta << " T=" << threshold
          << " rows=";
        for (std::size_t r = 0; r < m; ++r) {
          s << "[";
          for (std::size_t c = 0; c < d; ++c) s << (c ? "," : "") << g(r, c);
          s << "]";
        }
        first_mismatch = s.str();
      }
      ++mismatches;
    }
  }

  // Every m x d matrix over kValues.
  void Full(std::size_t m, std::size_t d) {
    GradientSet g(m, d);
    const std::size_t cells = m * d;
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < cells; ++i) count *= kValues.size();
    for (std::uint64_t code = 0; code < count; ++code) {
      std::uint64_t x = code;
      for (std::size_t i = 0; i < cells; ++i) {
        g(i / d, i % d) = kValues[x % 4];
        x /= 4;
      }
      Check(g, Beta(code), Threshold(code));
    }
  }

  // One matrix per multiset of three columns (column codes a <= b <= c).
  void ColumnMultisets(std::size_t m) {
    std::uint64_t columns = 1;
    for (std::size_t i = 0; i < m; ++i) columns *= kValues.size();
    GradientSet g(m, 3);
    std::uint64_t index = 0;
    for (std::uint64_t a = 0; a < columns; ++a) {
      SetColumn(g, 0, a);
      for (std::uint64_t b = a; b < columns; ++b) {
        SetColumn(g, 1, b);
        for (std::uint64_t c = b; c < columns; ++c, ++index) {
          SetColumn(g, 2, c);
          Check(g, Beta(index), Threshold(index));
        }
      }
    }
  }

 private:
  static double Beta(std::uint64_t i) { return kBetas[(i / kThresholds.size()) % kBetas.size()]; }
  static double Threshold(std::uint64_t i) { return kThresholds[i % kThresholds.size()]; }

  static void SetColumn(GradientSet& g, std::size_t col, std::uint64_t code) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      g(r, col) = kValues[code % 4];
      code /= 4;
    }
  }

  AggregatorConfig cfg_;
  BrsgdWorkspace ws_;
  AggregationOutcome out_;
  brsgd_oracle::ReferenceResult ref_;
  std::vector<std::vector<double>> rows_;
};

// Column permutations of a d = 3 matrix permute both outputs exactly.
std::size_t ColumnPermutationFailures(std::size_t samples) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, 3);
  std::array<std::size_t, 3> perm{0, 1, 2};
  std::size_t failures = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t m = 4 + s % 2;
    GradientSet g(m, 3);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < 3; ++c) g(r, c) = OracleSweep::kValues[pick(rng)];
    }
    AggregatorConfig cfg;
    cfg.beta = OracleSweep::kBetas[s % 3];
    cfg.threshold = OracleSweep::kThresholds[s % 7];
    const AggregationOutcome base = BrsgdAggregateOrMedian(g, cfg);
    std::vector<std::vector<double>> rows(m, std::vector<double>(3));
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < 3; ++c) rows[r][c] = g(r, c);
    }
    const auto ref_base = brsgd_oracle::ReferenceAggregate(rows, cfg.beta, cfg.threshold);
    std::sort(perm.begin(), perm.end());
    do {
      GradientSet h(m, 3);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
          h(r, c) = g(r, perm[c]);
          rows[r][c] = g(r, perm[c]);
        }
      }
      const AggregationOutcome out = BrsgdAggregateOrMedian(h, cfg);
      const auto ref = brsgd_oracle::ReferenceAggregate(rows, cfg.beta, cfg.threshold);
      bool same = out.survivors == base.survivors && *out.scores == *base.scores &&
                  ref.in_c1 == ref_base.in_c1 && ref.in_c2 == ref_base.in_c2;
      for (std::size_t c = 0; c < 3; ++c) {
        same = same && out.gradient[c] == base.gradient[perm[c]] &&
               ref.aggregate[c] == ref_base.aggregate[perm[c]];
      }
      failures += !same;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return failures;
}

Verdict OracleEquivalence() {
  OracleSweep sweep;
  for (std::size_t m = 1; m <= 5; ++m) {
    for (std::size_t d = 1; d <= 3; ++d) {
      if (d == 3 && m >= 4) {
        sweep.ColumnMultisets(m);
      } else {
        sweep.Full(m, d);
      }
    }
  }
  const std::size_t perm_failures = ColumnPermutationFailures(20000);
  std::string detail = std::to_string(sweep.checked) + " inputs (" +
                       std::to_string(sweep.fallbacks) + " median fallbacks), " +
                       std::to_string(sweep.mismatches) + " mismatches; " +
                       "column-permutation check " +
                       (perm_failures ? "FAILED" : "ok");
  if (sweep.mismatches) detail += "; first: " + sweep.first_mismatch;
  return {sweep.mismatches == 0 && perm_failures == 0, detail};
}

// 3. Contraction on the noise-free quadratic.
Verdict Contraction() {
  double worst = 0.0;
  std::size_t failed = 0;
  std::size_t rounds = 0;
  double theory = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    TrainingConfig cfg;
    cfg.task.kind = TaskKind::kQuadratic;
    cfg.task.quadratic.noise_std = 0.0;
    cfg.aggregator.kind = AggregatorKind::kBrsgd;
    cfg.aggregator.threshold_quantile = 0.7;
    cfg.iterations = 100;
    cfg.seed = seed;
    const TrainingResult r = RunTraining(cfg);
    const Task task(cfg.task, seed);
    const ConvergenceReport c = CheckContraction(r, task);
    theory = c.theoretical_factor;
    worst = std::max(worst, c.max_factor);
    rounds += c.factors.size();
    if (!c.passed || c.factors.empty()) ++failed;
  }
  return {failed == 0, "max ratio " + Fmt(worst, 6) + " vs " + Fmt(theory, 6) +
                           " over " + std::to_string(rounds) +
                           " pre-plateau rounds, 20 seeds"};
}

// 4. Plateau distance does not grow with n.
Verdict ErrorFloor() {
  std::vector<double> plateau;
  std::string detail = "mean plateau distance";
  for (std::size_t n : {16u, 64u, 256u}) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      TrainingConfig cfg;
      cfg.m = 20;
      cfg.n = n;
      cfg.alpha = 0.2;
      cfg.iterations = 100;
      cfg.seed = seed;
      cfg.task.kind = TaskKind::kQuadratic;
      cfg.attack.kind = AttackKind::kGaussian;
      cfg.aggregator.kind = AggregatorKind::kBrsgd;
      cfg.aggregator.threshold_quantile = 0.7;
      const TrainingResult r = RunTraining(cfg);
      const auto d = r.distances();
      sum += std::accumulate(d.end() - 10, d.end(), 0.0) / 10.0;
    }
    plateau.push_back(sum / 20.0);
    detail += " n=" + std::to_string(n) + ":" + Fmt(plateau.back());
  }
  const bool ok = plateau[1] <= plateau[0] && plateau[2] <= plateau[1];
  return {ok, detail};
}

// 5. Robustness ordering on the logistic task.
Verdict Robustness() {
  auto base = [] {
    TrainingConfig cfg;
    cfg.m = 20;
    cfg.n = 64;
    cfg.iterations = 200;
    cfg.task.kind = TaskKind::kLogistic;
    cfg.aggregator.beta = 0.5;
    cfg.aggregator.threshold_quantile = 0.7;
    return cfg;
  };
  bool ok = true;
  double min_mean_ratio = INFINITY;
  double max_gap = 0.0;
  std::string worst;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    TrainingConfig clean = base();
    clean.seed = seed;
    clean.aggregator.kind = AggregatorKind::kMean;
    const double reference = RunTraining(clean).final_loss();
    for (auto attack : {AttackKind::kGaussian, AttackKind::kModelNegation}) {
      for (double alpha : {0.1, 0.25}) {
        TrainingConfig cfg = base();
        cfg.seed = seed;
        cfg.alpha = alpha;
        cfg.attack.kind = attack;
        cfg.aggregator.kind = AggregatorKind::kBrsgd;
        const double robust = RunTraining(cfg).final_loss();
        cfg.aggregator.kind = AggregatorKind::kMean;
        const double naive = RunTraining(cfg).final_loss();
        const double ratio = naive / robust;
        const double gap = std::abs(robust - reference) / reference;
        min_mean_ratio = std::min(min_mean_ratio, ratio);
        if (gap > max_gap) {
          max_gap = gap;
          worst = std::string(ToString(attack)) + " alpha=" + Fmt(alpha) +
                  " seed=" + std::to_string(seed);
        }
        ok = ok && ratio >= 10.0 && gap <= 0.2;
      }
    }
  }
  return {ok, "min mean/brsgd loss ratio " + Fmt(min_mean_ratio) +
                  ", max |brsgd - clean mean| / clean mean " + Fmt(max_gap) +
                  " (" + worst + "), 3 seeds"};
}

// 6. Timing slopes in m.
Verdict Complexity() {
  const std::vector<std::size_t> ms{10, 20, 40, 80, 160, 320};
  const std::size_t d = 10000;
  const auto rows =
      BenchAggregators(ms, {d}, 5, 0, {AggregatorKind::kBrsgd, AggregatorKind::kKrum});
  const double brsgd = SlopeInM(rows, AggregatorKind::kBrsgd, d);
  const double krum = SlopeInM(rows, AggregatorKind::kKrum, d);
  return {brsgd >= 0.85 && brsgd <= 1.15 && krum >= 1.7,
          "brsgd slope " + Fmt(brsgd) + " (want 0.85..1.15), krum slope " +
              Fmt(krum) + " (want >= 1.7)"};
}

// 7. Attack fidelity.
Verdict AttackFidelity() {
  const std::size_t m = 10;
  const std::size_t d = 10000;
  GradientSet g(m, d);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (double& v : g.row(r)) v = unit(rng);
  }
  AttackSpec spec;
  spec.byzantine = {1, 4, 8};
  spec.seed = 11;

  double worst_rel = 0.0;
  for (std::uint64_t round = 0; round < 3; ++round) {
    const GradientSet out = GaussianAttack(g, spec, round);
    for (std::size_t w : spec.byzantine) {
      const auto row = out.row(w);
      const double mean = std::accumulate(row.begin(), row.end(), 0.0) / d;
      double sq = 0.0;
      for (double v : row) sq += (v - mean) * (v - mean);
      const double sd = std::sqrt(sq / static_cast<double>(d - 1));
      worst_rel = std::max(worst_rel, std::abs(sd - 200.0) / 200.0);
    }
  }
  const bool gaussian_ok = worst_rel <= 0.05;

  const auto flipped = InvertLabels({1, 8, 7, 2});
  const bool labels_ok = flipped == std::vector<int>{8, 1, 2, 7};

  const GradientSet neg = ModelNegationAttack(g, spec);
  std::vector<double> honest_sum(d, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (spec.IsByzantine(r)) continue;
    for (std::size_t c = 0; c < d; ++c) honest_sum[c] += g(r, c);
  }
  bool negation_ok = true;
  for (std::size_t w : spec.byzantine) {
    for (std::size_t c = 0; c < d; ++c) {
      negation_ok = negation_ok && neg(w, c) == -1e10 * honest_sum[c];
    }
  }
  return {gaussian_ok && labels_ok && negation_ok,
          "gaussian std worst deviation " + Fmt(100 * worst_rel, 3) +
              "% of 200; labels 1<->8, 7<->2 " + (labels_ok ? "exact" : "WRONG") +
              "; negation rows " + (negation_ok ? "exact" : "WRONG")};
}

std::map<std::string, std::string> ReadTree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    files[fs::relative(entry.path(), root).string()] = buf.str();
  }
  return files;
}

// 8. Byte-identical reruns of the default experiment.
Verdict Determinism() {
  const fs::path root = fs::temp_directory_path() / "brsgd_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig cfg = DefaultExperimentConfig();
  cfg.output_dir = (root / "a").string();
  RunExperiment(cfg);
  cfg.output_dir = (root / "b").string();
  RunExperiment(cfg);
  const auto a = ReadTree(root / "a");
  const auto b = ReadTree(root / "b");
  std::size_t bytes = 0;
  for (const auto& [name, body] : a) bytes += body.size();
  fs::remove_all(root);
  return {a == b && !a.empty(),
          std::to_string(a.size()) + " files, " + std::to_string(bytes) +
              " bytes, " + (a == b ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BrSGD acceptance suite"};
  std::string archive = "lemma1_witnesses.json";
  std::vector<int> only;
  app.add_option("--archive", archive, "where Lemma witnesses are written");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "lemma1-bound-suite", 120, [&] { return LemmaSuite(archive); }},
      {2, "oracle-equivalence", 60, OracleEquivalence},
      {3, "noise-free-contraction", 10, Contraction},
      {4, "error-floor-monotonicity", 120, ErrorFloor},
      {5, "robustness-ordering", 300, Robustness},
      {6, "aggregation-complexity", 180, Complexity},
      {7, "attack-fidelity", 0, AttackFidelity},
      {8, "determinism", 0, Determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget <= 0 || secs <= c.budget;
    const bool pass = v.ok && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << ": "
              << v.detail << " (" << Fmt(secs, 3) << " s";
    if (c.budget > 0) std::cout << " of " << c.budget << " s";
    if (!in_time) std::cout << ", over budget";
    std::cout << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
