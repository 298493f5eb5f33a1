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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mbrkit/corpus.hpp"

namespace mbrkit {

/// Heuristic thresholds. All comparisons are inclusive: a sentence with
/// exactly max_chars characters passes.
struct FilterConfig {
  double max_avg_word_len = 15;
  std::size_t max_chars = 500;
  /// Digits over non-whitespace characters.
  double max_digit_ratio = 0.15;
  std::size_t max_longest_word = 28;
  std::size_t max_words = 100;
  std::size_t min_edit_distance = 2;
  std::size_t min_chars = 5;
  double min_lang_prob = 0.10;
  /// Language-ID rule on every pair. The pipeline switches it on when the
  /// sidecar carries lang_prob_src / lang_prob_tgt for any pair; otherwise it
  /// only applies to pairs that have those scores.
  bool lang_id = false;
  /// Disabled unless set; 0.50 is the usual setting when enabled.
  std::optional<double> min_bicleaner;

  /// Throws a parameter error on negative thresholds or ratios outside [0, 1].
  void validate() const;
};

namespace rule {
inline constexpr std::string_view kAvgWordLen = "max_avg_word_len";
inline constexpr std::string_view kMaxChars = "max_chars";
inline constexpr std::string_view kDigitRatio = "max_digit_ratio";
inline constexpr std::string_view kLongestWord = "max_longest_word";
inline constexpr std::string_view kMaxWords = "max_words";
inline constexpr std::string_view kEditDistance = "min_edit_distance";
inline constexpr std::string_view kMinChars = "min_chars";
inline constexpr std::string_view kLangProb = "min_lang_prob";
inline constexpr std::string_view kBicleaner = "min_bicleaner";
}  // namespace rule

/// Rules in evaluation order.
const std::vector<std::string_view>& filter_rule_names();

struct FilterDecision {
  bool accepted = true;
  std::vector<std::string> rejected_by;  // in rule order, each rule at most once
  /// Rules that failed only because their sidecar score was absent.
  std::vector<std::string> missing_scores;
};

struct FilterReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t dedup_removed = 0;
  std::map<std::string, std::size_t> per_rule_rejections;

  bool reconciles() const { return accepted + rejected + dedup_removed == total; }
};

/// Per-sentence measurements used by the rules; exposed for diagnostics.
struct SentenceShape {
  std::size_t chars = 0;
  std::size_t non_space_chars = 0;
  std::size_t digits = 0;
  std::size_t words = 0;
  std::size_t longest_word = 0;
  double avg_word_len = 0.0;
  double digit_ratio = 0.0;
};

SentenceShape measure(std::string_view sentence);

/// `scores` are this pair's sidecar entries (may be null).
FilterDecision filter_pair(const SegmentPair& pair, const FilterConfig& cfg,
                           const std::map<std::string, double>* scores = nullptr);

/// Exact (source, target) dedup; first occurrence wins.
std::pair<Corpus, std::size_t> dedupe(const Corpus& corpus);

struct FilterOutcome {
  Corpus accepted;
  FilterReport report;
  /// Per input pair; nullopt for pairs removed by dedup.
  std::vector<std::optional<FilterDecision>> decisions;
};

/// Dedup, then every rule on each survivor. Accepted pairs keep their input
/// order, are renumbered 0..n-1 and record the input id in meta["origin_id"].
FilterOutcome run_filter_pipeline(const Corpus& corpus, const FilterConfig& cfg,
                                  const ScoreSidecar* sidecar = nullptr,
                                  std::size_t threads = 1);

FilterOutcome run_filter_pipeline(const Corpus& corpus, const FilterConfig& cfg,
                                  const std::optional<std::filesystem::path>& sidecar_path,
                                  std::size_t threads = 1);

std::string format_filter_report(const FilterReport& report);
std::string filter_report_json(const FilterReport& report);

}  // namespace mbrkit
