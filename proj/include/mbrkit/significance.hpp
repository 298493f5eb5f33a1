/* Copyright 2026 The mbrkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbrkit/metrics.hpp"

namespace mbrkit {

class ScorerClient;

/// Generator behind every resampling run; recorded in reports with the seed.
inline constexpr std::string_view kBootstrapGenerator = "mt19937_64";

struct MetricSpec {
  enum class Kind { kChrf, kBleu, kExternal };
  std::string name;
  Kind kind = Kind::kChrf;
  ScorerClient* scorer = nullptr;

  static MetricSpec chrf() { return {"chrF", Kind::kChrf, nullptr}; }
  static MetricSpec bleu() { return {"BLEU", Kind::kBleu, nullptr}; }
  static MetricSpec external(std::string name, ScorerClient& scorer) {
    return {std::move(name), Kind::kExternal, &scorer};
  }
};

/// Parses "chrF", "BLEU" (case-insensitive).
MetricSpec parse_metric(std::string_view name);

struct SystemEvaluation {
  std::string system_name;
  std::size_t segments = 0;
  std::map<std::string, MetricScore> per_metric;
  /// Per-sentence n-gram statistics, kept so corpus BLEU can be recomputed
  /// on resampled test sets.
  std::vector<BleuStats> bleu_stats;
};

/// `sources` is only needed by external metrics whose endpoint wants src.
SystemEvaluation evaluate_system(const std::string& system_name,
                                 const std::vector<std::string>& hypotheses,
                                 const std::vector<std::string>& references,
                                 const std::vector<MetricSpec>& metrics,
                                 const std::vector<std::string>* sources = nullptr);

struct SignificanceResult {
  std::string metric_name;
  double delta = 0.0;  // B - A on the full test set
  double p_value = 1.0;
  std::size_t trials = 0;
  double alpha = 0.05;
  bool significant = false;
  std::uint64_t seed = 0;
};

/// Uniform index in [0, n) from a 64-bit generator by rejection, so results do
/// not depend on the standard library's distribution implementation.
class IndexSampler {
 public:
  explicit IndexSampler(std::uint64_t seed);
  std::size_t operator()(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// Resamples n indices with replacement `trials` times and calls
/// delta(indices) for each; returns the one-sided, add-one smoothed p-value
/// (1 + #{delta <= 0}) / (trials + 1).
double bootstrap_p_value(std::size_t n, std::size_t trials, std::uint64_t seed,
                         const std::function<double(std::span<const std::size_t>)>& delta);

/// Paired bootstrap on the mean of per-sentence scores.
SignificanceResult paired_bootstrap(std::span<const double> scores_a,
                                    std::span<const double> scores_b,
                                    std::size_t trials = 1000, double alpha = 0.05,
                                    std::uint64_t seed = 0);

/// Paired bootstrap on corpus BLEU recomputed from resampled statistics.
SignificanceResult paired_bootstrap_bleu(std::span<const BleuStats> stats_a,
                                         std::span<const BleuStats> stats_b,
                                         std::size_t trials = 1000, double alpha = 0.05,
                                         std::uint64_t seed = 0);

/// One result per shared metric, B relative to A.
std::vector<SignificanceResult> compare_systems(const SystemEvaluation& a,
                                                const SystemEvaluation& b,
                                                std::size_t trials = 1000, double alpha = 0.05,
                                                std::uint64_t seed = 0);

/// Rows are systems, columns metrics; a trailing '*' marks values significantly
/// better than `baseline`. `versus_baseline[i]` holds system i's results.
std::string render_table(const std::vector<SystemEvaluation>& systems,
                         const std::vector<std::vector<SignificanceResult>>& versus_baseline);

/// Machine-readable records of a comparison.
std::string comparison_json(const SystemEvaluation& a, const SystemEvaluation& b,
                            const std::vector<SignificanceResult>& results);

std::string evaluation_json(const SystemEvaluation& evaluation);

}  // namespace mbrkit
