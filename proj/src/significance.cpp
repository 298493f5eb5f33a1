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

#include "mbrkit/significance.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mbrkit/error.hpp"
#include "mbrkit/scorer.hpp"

namespace mbrkit {

MetricSpec parse_metric(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "chrf") return MetricSpec::chrf();
  if (lower == "bleu") return MetricSpec::bleu();
  fail(ErrorCode::kConfiguration,
       "unknown metric '" + std::string(name) + "' (expected chrF or BLEU)");
}

SystemEvaluation evaluate_system(const std::string& system_name,
                                 const std::vector<std::string>& hypotheses,
                                 const std::vector<std::string>& references,
                                 const std::vector<MetricSpec>& metrics,
                                 const std::vector<std::string>* sources) {
  if (hypotheses.size() != references.size()) {
    fail(ErrorCode::kAlignment, std::to_string(hypotheses.size()) + " hypotheses but " +
                                    std::to_string(references.size()) + " references");
  }
  SystemEvaluation eval;
  eval.system_name = system_name;
  eval.segments = hypotheses.size();
  for (const auto& metric : metrics) {
    if (eval.per_metric.contains(metric.name)) {
      fail(ErrorCode::kConfiguration, "metric '" + metric.name + "' listed twice");
    }
    switch (metric.kind) {
      case MetricSpec::Kind::kChrf:
        eval.per_metric[metric.name] = chrf_corpus(hypotheses, references);
        break;
      case MetricSpec::Kind::kBleu: {
        eval.per_metric[metric.name] = bleu_corpus(hypotheses, references);
        eval.bleu_stats.clear();
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
          eval.bleu_stats.push_back(bleu_statistics(hypotheses[i], references[i]));
        }
        break;
      }
      case MetricSpec::Kind::kExternal: {
        if (metric.scorer == nullptr) {
          fail(ErrorCode::kConfiguration, "metric '" + metric.name + "' has no scorer endpoint");
        }
        std::vector<ScoreRequest> requests(hypotheses.size());
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
          requests[i].mt = hypotheses[i];
          requests[i].ref = references[i];
          if (sources != nullptr && i < sources->size()) requests[i].src = (*sources)[i];
        }
        std::vector<double> scores;
        try {
          scores = metric.scorer->score(requests);
        } catch (const Error& e) {
          throw Error(e.code(), "metric '" + metric.name + "': " + e.what());
        }
        double sum = 0.0;
        for (double s : scores) sum += s;
        MetricScore score;
        score.corpus_value = scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
        score.sentence_values = std::move(scores);
        score.signature = metric.name + "|external";
        eval.per_metric[metric.name] = std::move(score);
        break;
      }
    }
  }
  return eval;
}

IndexSampler::IndexSampler(std::uint64_t seed) : engine_(seed) {}

std::size_t IndexSampler::operator()(std::size_t n) {
  const std::uint64_t bound = n;
  // 2^64 mod n; values below it would bias the modulo.
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

double bootstrap_p_value(std::size_t n, std::size_t trials, std::uint64_t seed,
                         const std::function<double(std::span<const std::size_t>)>& delta) {
  if (n == 0) fail(ErrorCode::kParameter, "bootstrap needs at least one segment");
  if (trials == 0) fail(ErrorCode::kParameter, "bootstrap needs at least one trial");
  IndexSampler sampler(seed);
  std::vector<std::size_t> indices(n);
  std::size_t not_better = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& index : indices) index = sampler(n);
    if (delta(indices) <= 0.0) ++not_better;
  }
  return static_cast<double>(1 + not_better) / static_cast<double>(trials + 1);
}

namespace {

double mean_at(std::span<const double> values, std::span<const std::size_t> indices) {
  double sum = 0.0;
  for (std::size_t i : indices) sum += values[i];
  return sum / static_cast<double>(indices.size());
}

double mean_all(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

void check_paired(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorCode::kAlignment, "paired samples differ in length: " + std::to_string(a) +
                                    " vs " + std::to_string(b));
  }
}

SignificanceResult finish(double delta, double p, std::size_t trials, double alpha,
                          std::uint64_t seed) {
  SignificanceResult r;
  r.delta = delta;
  r.p_value = p;
  r.trials = trials;
  r.alpha = alpha;
  r.significant = p < alpha;
  r.seed = seed;
  return r;
}

BleuStats sum_stats(std::span<const BleuStats> stats, std::span<const std::size_t> indices) {
  BleuStats total(static_cast<int>(stats.front().correct.size()));
  for (std::size_t i : indices) total += stats[i];
  return total;
}

}  // namespace

SignificanceResult paired_bootstrap(std::span<const double> scores_a,
                                    std::span<const double> scores_b, std::size_t trials,
                                    double alpha, std::uint64_t seed) {
  check_paired(scores_a.size(), scores_b.size());
  const double p = bootstrap_p_value(
      scores_a.size(), trials, seed, [&](std::span<const std::size_t> idx) {
        return mean_at(scores_b, idx) - mean_at(scores_a, idx);
      });
  return finish(mean_all(scores_b) - mean_all(scores_a), p, trials, alpha, seed);
}

SignificanceResult paired_bootstrap_bleu(std::span<const BleuStats> stats_a,
                                         std::span<const BleuStats> stats_b, std::size_t trials,
                                         double alpha, std::uint64_t seed) {
  check_paired(stats_a.size(), stats_b.size());
  const BleuParams params{};
  const double p = bootstrap_p_value(
      stats_a.size(), trials, seed, [&](std::span<const std::size_t> idx) {
        return bleu_from_statistics(sum_stats(stats_b, idx), params) -
               bleu_from_statistics(sum_stats(stats_a, idx), params);
      });
  std::vector<std::size_t> all(stats_a.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double delta = bleu_from_statistics(sum_stats(stats_b, all), params) -
                       bleu_from_statistics(sum_stats(stats_a, all), params);
  return finish(delta, p, trials, alpha, seed);
}

std::vector<SignificanceResult> compare_systems(const SystemEvaluation& a,
                                                const SystemEvaluation& b, std::size_t trials,
                                                double alpha, std::uint64_t seed) {
  if (a.segments != b.segments) {
    fail(ErrorCode::kConfiguration, "systems differ in segment count: " +
                                        std::to_string(a.segments) + " vs " +
                                        std::to_string(b.segments));
  }
  std::vector<std::string> asymmetric;
  for (const auto& [name, _] : a.per_metric) {
    if (!b.per_metric.contains(name)) asymmetric.push_back(name + " (only in " + a.system_name + ")");
  }
  for (const auto& [name, _] : b.per_metric) {
    if (!a.per_metric.contains(name)) asymmetric.push_back(name + " (only in " + b.system_name + ")");
  }
  if (!asymmetric.empty()) {
    std::string list;
    for (const auto& item : asymmetric) list += (list.empty() ? "" : ", ") + item;
    fail(ErrorCode::kConfiguration, "metric sets differ: " + list);
  }

  std::vector<SignificanceResult> results;
  for (const auto& [name, score_a] : a.per_metric) {
    const MetricScore& score_b = b.per_metric.at(name);
    SignificanceResult r;
    const bool corpus_bleu = score_a.signature == kBleuSignature &&
                             a.bleu_stats.size() == a.segments &&
                             b.bleu_stats.size() == b.segments;
    if (corpus_bleu) {
      r = paired_bootstrap_bleu(a.bleu_stats, b.bleu_stats, trials, alpha, seed);
    } else {
      if (!score_a.sentence_values || !score_b.sentence_values) {
        fail(ErrorCode::kConfiguration, "metric '" + name + "' has no sentence scores");
      }
      r = paired_bootstrap(*score_a.sentence_values, *score_b.sentence_values, trials, alpha,
                           seed);
    }
    r.metric_name = name;
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

std::string format_value(const std::string& metric, const MetricScore& score) {
  char buffer[64];
  const bool lexical = score.signature == kBleuSignature ||
                       score.signature.rfind("chrF", 0) == 0;
  std::snprintf(buffer, sizeof buffer, lexical ? "%.2f" : "%.4f", score.corpus_value);
  (void)metric;
  return buffer;
}

}  // namespace

std::string render_table(const std::vector<SystemEvaluation>& systems,
                         const std::vector<std::vector<SignificanceResult>>& versus_baseline) {
  if (systems.empty()) return "";
  std::vector<std::string> metrics;
  for (const auto& [name, _] : systems.front().per_metric) metrics.push_back(name);

  std::vector<std::vector<std::string>> cells;
  cells.push_back({"System"});
  for (const auto& m : metrics) cells.back().push_back(m);
  for (std::size_t s = 0; s < systems.size(); ++s) {
    std::vector<std::string> row{systems[s].system_name};
    for (const auto& m : metrics) {
      std::string cell = "-";
      if (auto it = systems[s].per_metric.find(m); it != systems[s].per_metric.end()) {
        cell = format_value(m, it->second);
        if (s < versus_baseline.size()) {
          for (const auto& r : versus_baseline[s]) {
            if (r.metric_name == m && r.significant && r.delta > 0) cell += "*";
          }
        }
      }
      row.push_back(cell);
    }
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out << row[c] << std::string(widths[c] - row[c].size(), ' ');
      } else {
        out << "  " << std::string(widths[c] - row[c].size(), ' ') << row[c];
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string comparison_json(const SystemEvaluation& a, const SystemEvaluation& b,
                            const std::vector<SignificanceResult>& results) {
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["system_a"] = a.system_name;
    j["system_b"] = b.system_name;
    j["metric"] = r.metric_name;
    j["signature"] = a.per_metric.at(r.metric_name).signature;
    j["value_a"] = a.per_metric.at(r.metric_name).corpus_value;
    j["value_b"] = b.per_metric.at(r.metric_name).corpus_value;
    j["delta"] = r.delta;
    j["p_value"] = r.p_value;
    j["trials"] = r.trials;
    j["alpha"] = r.alpha;
    j["significant"] = r.significant;
    j["seed"] = r.seed;
    j["generator"] = kBootstrapGenerator;
    records.push_back(std::move(j));
  }
  return records.dump(1);
}

std::string evaluation_json(const SystemEvaluation& evaluation) {
  nlohmann::ordered_json j;
  j["system"] = evaluation.system_name;
  j["segments"] = evaluation.segments;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [name, score] : evaluation.per_metric) {
    metrics[name] = {{"corpus", score.corpus_value},
                     {"signature", score.signature},
                     {"sentences", score.sentence_values.value_or(std::vector<double>{})}};
  }
  j["metrics"] = std::move(metrics);
  return j.dump(1);
}

}  // namespace mbrkit
