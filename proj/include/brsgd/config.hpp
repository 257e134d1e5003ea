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

// JSON form of experiment configs and checker reports. Every key is
// optional and falls back to the defaults in the structs; unknown keys are
// rejected so a typo never silently changes a sweep.

#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "brsgd/aggregation.hpp"
#include "brsgd/attacks.hpp"
#include "brsgd/errors.hpp"
#include "brsgd/simcluster.hpp"
#include "brsgd/tasks.hpp"
#include "brsgd/verification.hpp"

namespace brsgd {

using Json = nlohmann::json;

enum class OutputFormat { kCsv, kJson };

inline std::string_view ToString(OutputFormat f) {
  return f == OutputFormat::kCsv ? "csv" : "json";
}

inline OutputFormat ParseOutputFormat(std::string_view name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json") return OutputFormat::kJson;
  throw ConfigInvalid("unknown output format '" + std::string(name) + "'");
}

struct SweepAxes {
  std::vector<AttackKind> attacks{AttackKind::kGaussian,
                                  AttackKind::kModelNegation,
                                  AttackKind::kGradientScale,
                                  AttackKind::kLabelInverse};
  std::vector<double> alphas{0.1, 0.25, 0.5};
  std::vector<AggregatorKind> aggregators{
      AggregatorKind::kBrsgd, AggregatorKind::kCoordMedian,
      AggregatorKind::kMean, AggregatorKind::kKrum};
  std::vector<std::uint64_t> seeds{1};

  bool operator==(const SweepAxes&) const = default;
};

struct ExperimentConfig {
  TrainingConfig training;
  SweepAxes sweep;
  std::string output_dir = "out";
  OutputFormat format = OutputFormat::kCsv;
  // Off by default: wall-clock columns would break byte-identical reruns.
  bool record_timing = false;
  std::size_t jobs = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

// Desk-scale stand-in for the image benchmark: 20 workers training a
// 10-class logistic model, BrSGD with beta = 1/2 and T at the 0.7 quantile.
inline ExperimentConfig DefaultExperimentConfig() {
  ExperimentConfig cfg;
  cfg.training.m = 20;
  cfg.training.n = 64;
  cfg.training.iterations = 200;
  cfg.training.task.kind = TaskKind::kLogistic;
  cfg.training.aggregator.beta = 0.5;
  cfg.training.aggregator.threshold_quantile = 0.7;
  return cfg;
}

namespace detail {

inline void RequireKeys(const Json& obj, std::string_view where,
                        std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw ConfigInvalid(std::string(where) + " must be a JSON object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) {
      throw ConfigInvalid("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void Read(const Json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <typename T>
void ReadOptional(const Json& obj, const char* key, std::optional<T>& out) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
  } else {
    out = obj.at(key).get<T>();
  }
}

template <typename T>
Json OptionalToJson(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace detail

inline Json ToJson(const TaskSpec& t) {
  return {{"kind", ToString(t.kind)},
          {"quadratic",
           {{"dim", t.quadratic.dim},
            {"lambda_min", t.quadratic.lambda_min},
            {"lambda_max", t.quadratic.lambda_max},
            {"noise_std", t.quadratic.noise_std},
            {"optimum_scale", t.quadratic.optimum_scale}}},
          {"logistic",
           {{"classes", t.logistic.classes},
            {"features", t.logistic.features},
            {"separation", t.logistic.separation},
            {"l2", t.logistic.l2},
            {"reference_samples", t.logistic.reference_samples},
            {"test_samples", t.logistic.test_samples}}}};
}

inline Json ToJson(const TrainingConfig& c) {
  return {{"m", c.m},
          {"n", c.n},
          {"alpha", c.alpha},
          {"eta", c.eta},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"domain_diameter", c.domain_diameter},
          {"batch_size", c.batch_size},
          {"task", ToJson(c.task)},
          {"attack",
           {{"kind", ToString(c.attack.kind)},
            {"noise_std", c.attack.noise_std},
            {"scale_const", c.attack.scale_const}}},
          {"aggregator",
           {{"kind", ToString(c.aggregator.kind)},
            {"beta", c.aggregator.beta},
            {"threshold", c.aggregator.threshold},
            {"threshold_quantile",
             detail::OptionalToJson(c.aggregator.threshold_quantile)},
            {"krum_f", detail::OptionalToJson(c.aggregator.krum_f)}}}};
}

inline Json ToJson(const ExperimentConfig& c) {
  Json attacks = Json::array();
  for (auto a : c.sweep.attacks) attacks.push_back(ToString(a));
  Json aggregators = Json::array();
  for (auto a : c.sweep.aggregators) aggregators.push_back(ToString(a));
  return {{"training", ToJson(c.training)},
          {"sweep",
           {{"attacks", attacks},
            {"alphas", c.sweep.alphas},
            {"aggregators", aggregators},
            {"seeds", c.sweep.seeds}}},
          {"output",
           {{"dir", c.output_dir},
            {"format", ToString(c.format)},
            {"record_timing", c.record_timing}}},
          {"jobs", c.jobs}};
}

inline void FromJson(const Json& j, TaskSpec& t) {
  detail::RequireKeys(j, "task", {"kind", "quadratic", "logistic"});
  if (j.contains("kind")) t.kind = ParseTaskKind(j.at("kind").get<std::string>());
  if (j.contains("quadratic")) {
    const Json& q = j.at("quadratic");
    detail::RequireKeys(q, "task.quadratic",
                        {"dim", "lambda_min", "lambda_max", "noise_std",
                         "optimum_scale"});
    detail::Read(q, "dim", t.quadratic.dim);
    detail::Read(q, "lambda_min", t.quadratic.lambda_min);
    detail::Read(q, "lambda_max", t.quadratic.lambda_max);
    detail::Read(q, "noise_std", t.quadratic.noise_std);
    detail::Read(q, "optimum_scale", t.quadratic.optimum_scale);
  }
  if (j.contains("logistic")) {
    const Json& l = j.at("logistic");
    detail::RequireKeys(l, "task.logistic",
                        {"classes", "features", "separation", "l2",
                         "reference_samples", "test_samples"});
    detail::Read(l, "classes", t.logistic.classes);
    detail::Read(l, "features", t.logistic.features);
    detail::Read(l, "separation", t.logistic.separation);
    detail::Read(l, "l2", t.logistic.l2);
    detail::Read(l, "reference_samples", t.logistic.reference_samples);
    detail::Read(l, "test_samples", t.logistic.test_samples);
  }
}

inline void FromJson(const Json& j, TrainingConfig& c) {
  detail::RequireKeys(j, "training",
                      {"m", "n", "alpha", "eta", "iterations", "seed",
                       "domain_diameter", "batch_size", "task", "attack",
                       "aggregator"});
  detail::Read(j, "m", c.m);
  detail::Read(j, "n", c.n);
  detail::Read(j, "alpha", c.alpha);
  detail::Read(j, "eta", c.eta);
  detail::Read(j, "iterations", c.iterations);
  detail::Read(j, "seed", c.seed);
  detail::Read(j, "domain_diameter", c.domain_diameter);
  detail::Read(j, "batch_size", c.batch_size);
  if (j.contains("task")) FromJson(j.at("task"), c.task);
  if (j.contains("attack")) {
    const Json& a = j.at("attack");
    detail::RequireKeys(a, "training.attack", {"kind", "noise_std", "scale_const"});
    if (a.contains("kind")) {
      c.attack.kind = ParseAttackKind(a.at("kind").get<std::string>());
    }
    detail::Read(a, "noise_std", c.attack.noise_std);
    detail::Read(a, "scale_const", c.attack.scale_const);
  }
  if (j.contains("aggregator")) {
    const Json& a = j.at("aggregator");
    detail::RequireKeys(a, "training.aggregator",
                        {"kind", "beta", "threshold", "threshold_quantile",
                         "krum_f"});
    if (a.contains("kind")) {
      c.aggregator.kind = ParseAggregatorKind(a.at("kind").get<std::string>());
    }
    detail::Read(a, "beta", c.aggregator.beta);
    detail::Read(a, "threshold", c.aggregator.threshold);
    detail::ReadOptional(a, "threshold_quantile", c.aggregator.threshold_quantile);
    detail::ReadOptional(a, "krum_f", c.aggregator.krum_f);
  }
}

inline void ValidateExperiment(const ExperimentConfig& c) {
  const auto& s = c.sweep;
  if (s.attacks.empty() || s.alphas.empty() || s.aggregators.empty() ||
      s.seeds.empty()) {
    throw ConfigInvalid("every sweep axis needs at least one value");
  }
  if (c.jobs == 0) throw ConfigInvalid("jobs must be >= 1");
  c.training.Validate();
}

// Parses and validates. Type errors and unknown keys become ConfigInvalid.
inline ExperimentConfig ExperimentConfigFromJson(const Json& j,
                                                 ExperimentConfig base =
                                                     DefaultExperimentConfig()) {
  ExperimentConfig c = std::move(base);
  try {
    detail::RequireKeys(j, "config", {"training", "sweep", "output", "jobs"});
    if (j.contains("training")) FromJson(j.at("training"), c.training);
    if (j.contains("sweep")) {
      const Json& s = j.at("sweep");
      detail::RequireKeys(s, "sweep", {"attacks", "alphas", "aggregators", "seeds"});
      if (s.contains("attacks")) {
        c.sweep.attacks.clear();
        for (const auto& a : s.at("attacks")) {
          c.sweep.attacks.push_back(ParseAttackKind(a.get<std::string>()));
        }
      }
      detail::Read(s, "alphas", c.sweep.alphas);
      if (s.contains("aggregators")) {
        c.sweep.aggregators.clear();
        for (const auto& a : s.at("aggregators")) {
          c.sweep.aggregators.push_back(ParseAggregatorKind(a.get<std::string>()));
        }
      }
      detail::Read(s, "seeds", c.sweep.seeds);
    }
    if (j.contains("output")) {
      const Json& o = j.at("output");
      detail::RequireKeys(o, "output", {"dir", "format", "record_timing"});
      detail::Read(o, "dir", c.output_dir);
      if (o.contains("format")) {
        c.format = ParseOutputFormat(o.at("format").get<std::string>());
      }
      detail::Read(o, "record_timing", c.record_timing);
    }
    detail::Read(j, "jobs", c.jobs);
  } catch (const Json::exception& e) {
    throw ConfigInvalid(std::string("malformed config: ") + e.what());
  }
  ValidateExperiment(c);
  return c;
}

inline ExperimentConfig ParseExperimentConfig(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
  }
  return ExperimentConfigFromJson(j);
}

inline ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseExperimentConfig(std::string_view(buf.str()));
}

// Checker reports.

inline Json ToJson(const Lemma1Witness& w) {
  return {{"adversary", w.adversary},
          {"placement", w.placement == Placement::kByzantineFirst ? "byzantine_first"
                                                                  : "byzantine_last"},
          {"aggregate", w.aggregate},
          {"error", w.error},
          {"fallback", w.fallback}};
}

inline Json ToJson(const LemmaScenario& s) {
  return {{"honest", s.honest},   {"mu", s.mu},
          {"byzantine_count", s.byzantine_count},
          {"beta", s.beta},       {"alpha", s.alpha},
          {"m", s.m()},           {"t", s.t()},
          {"s", s.s()}};
}

inline Json ToJson(const Lemma1Report& r) {
  Json witnesses = Json::array();
  for (const auto& w : r.witnesses) witnesses.push_back(ToJson(w));
  return {{"check", "lemma1"},
          {"scenario", ToJson(r.scenario)},
          {"trials", r.trials},
          {"bound", r.bound},
          {"worst_error", r.worst_error},
          {"worst", ToJson(r.worst)},
          {"violations", r.violations},
          {"fallbacks", r.fallbacks},
          {"holds", r.holds()},
          {"witnesses", witnesses}};
}

inline LemmaScenario ScenarioFromJson(const Json& j) {
  LemmaScenario s;
  s.honest = j.at("honest").get<std::vector<double>>();
  s.mu = j.at("mu").get<double>();
  s.byzantine_count = j.at("byzantine_count").get<std::size_t>();
  s.beta = j.at("beta").get<double>();
  s.alpha = j.value("alpha", 0.0);
  return s;
}

inline Lemma1Witness WitnessFromJson(const Json& j) {
  Lemma1Witness w;
  w.adversary = j.at("adversary").get<std::vector<double>>();
  const auto placement = j.at("placement").get<std::string>();
  if (placement == "byzantine_first") {
    w.placement = Placement::kByzantineFirst;
  } else if (placement == "byzantine_last") {
    w.placement = Placement::kByzantineLast;
  } else {
    throw ConfigInvalid("unknown placement '" + placement + "'");
  }
  w.aggregate = j.at("aggregate").get<double>();
  w.error = j.at("error").get<double>();
  w.fallback = j.value("fallback", false);
  return w;
}

inline Json ToJson(const ConvergenceReport& r) {
  return {{"check", "contraction"},
          {"theoretical_factor", r.theoretical_factor},
          {"max_factor", r.max_factor},
          {"checked_rounds", r.factors.size()},
          {"plateau_distance", r.plateau_distance},
          {"plateau_threshold", r.plateau_threshold},
          {"delta_estimate", r.delta_estimate},
          {"passed", r.passed}};
}

}  // namespace brsgd
