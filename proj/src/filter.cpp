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

#include "mbrkit/filter.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mbrkit/error.hpp"
#include "mbrkit/metrics.hpp"
#include "mbrkit/parallel.hpp"
#include "mbrkit/utf8.hpp"

namespace mbrkit {

void FilterConfig::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0)) fail(ErrorCode::kParameter, std::string(name) + " must be non-negative");
  };
  auto unit = [](double v, const char* name) {
    if (!(v >= 0 && v <= 1)) fail(ErrorCode::kParameter, std::string(name) + " must lie in [0, 1]");
  };
  non_negative(max_avg_word_len, "max_avg_word_len");
  unit(max_digit_ratio, "max_digit_ratio");
  unit(min_lang_prob, "min_lang_prob");
  if (min_bicleaner) unit(*min_bicleaner, "min_bicleaner");
}

const std::vector<std::string_view>& filter_rule_names() {
  static const std::vector<std::string_view> names = {
      rule::kAvgWordLen, rule::kMaxChars,  rule::kDigitRatio,
      rule::kLongestWord, rule::kMaxWords, rule::kEditDistance,
      rule::kMinChars,   rule::kLangProb,  rule::kBicleaner};
  return names;
}

SentenceShape measure(std::string_view sentence) {
  const std::u32string text = utf8::decode(sentence);
  SentenceShape shape;
  shape.chars = text.size();
  for (char32_t c : text) {
    if (utf8::is_space(c)) continue;
    ++shape.non_space_chars;
    if (utf8::is_ascii_digit(c)) ++shape.digits;
  }
  const auto words = utf8::split_whitespace(text);
  shape.words = words.size();
  for (auto w : words) shape.longest_word = std::max(shape.longest_word, w.size());
  // Words are maximal whitespace-free runs, so their lengths sum to the
  // non-whitespace character count.
  shape.avg_word_len =
      words.empty() ? 0.0 : static_cast<double>(shape.non_space_chars) / words.size();
  shape.digit_ratio = shape.non_space_chars == 0
                          ? 0.0
                          : static_cast<double>(shape.digits) / shape.non_space_chars;
  return shape;
}

FilterDecision filter_pair(const SegmentPair& pair, const FilterConfig& cfg,
                           const std::map<std::string, double>* scores) {
  if (!pair.target) {
    fail(ErrorCode::kIncompleteCorpus, "segment " + std::to_string(pair.id) + " has no target");
  }
  const SentenceShape src = measure(pair.source);
  const SentenceShape tgt = measure(*pair.target);
  std::vector<bool> failed(filter_rule_names().size(), false);
  FilterDecision decision;

  auto either = [&](auto&& violates) { return violates(src) || violates(tgt); };
  failed[0] = either([&](const SentenceShape& s) { return s.avg_word_len > cfg.max_avg_word_len; });
  failed[1] = either([&](const SentenceShape& s) { return s.chars > cfg.max_chars; });
  failed[2] = either([&](const SentenceShape& s) { return s.digit_ratio > cfg.max_digit_ratio; });
  failed[3] = either([&](const SentenceShape& s) { return s.longest_word > cfg.max_longest_word; });
  failed[4] = either([&](const SentenceShape& s) { return s.words > cfg.max_words; });
  failed[5] = levenshtein(pair.source, *pair.target) < cfg.min_edit_distance;
  failed[6] = either([&](const SentenceShape& s) { return s.chars < cfg.min_chars; });

  auto lookup = [&](const char* name) -> std::optional<double> {
    if (scores == nullptr) return std::nullopt;
    auto it = scores->find(name);
    if (it == scores->end()) return std::nullopt;
    return it->second;
  };
  const auto lang_src = lookup("lang_prob_src");
  const auto lang_tgt = lookup("lang_prob_tgt");
  if (cfg.lang_id || lang_src || lang_tgt) {
    if (!lang_src || !lang_tgt) decision.missing_scores.emplace_back(rule::kLangProb);
    failed[7] = !lang_src || !lang_tgt || *lang_src < cfg.min_lang_prob ||
                *lang_tgt < cfg.min_lang_prob;
  }
  if (cfg.min_bicleaner) {
    const auto bicleaner = lookup("bicleaner");
    if (!bicleaner) decision.missing_scores.emplace_back(rule::kBicleaner);
    failed[8] = !bicleaner || *bicleaner < *cfg.min_bicleaner;
  }

  const auto& names = filter_rule_names();
  for (std::size_t r = 0; r < names.size(); ++r) {
    if (failed[r]) decision.rejected_by.emplace_back(names[r]);
  }
  decision.accepted = decision.rejected_by.empty();
  return decision;
}

std::pair<Corpus, std::size_t> dedupe(const Corpus& corpus) {
  std::set<std::pair<std::string_view, std::string_view>> seen;
  Corpus out;
  std::size_t removed = 0;
  for (const auto& pair : corpus.pairs) {
    if (!pair.target) {
      fail(ErrorCode::kIncompleteCorpus, "segment " + std::to_string(pair.id) + " has no target");
    }
    if (seen.emplace(pair.source, *pair.target).second) {
      out.pairs.push_back(pair);
    } else {
      ++removed;
    }
  }
  return {std::move(out), removed};
}

FilterOutcome run_filter_pipeline(const Corpus& corpus, const FilterConfig& cfg,
                                  const ScoreSidecar* sidecar, std::size_t threads) {
  cfg.validate();
  FilterConfig effective = cfg;
  if (sidecar != nullptr) {
    for (const auto& [id, scores] : *sidecar) {
      if (scores.contains("lang_prob_src") || scores.contains("lang_prob_tgt")) {
        effective.lang_id = true;
        break;
      }
    }
  }
  FilterOutcome outcome;
  outcome.report.total = corpus.size();
  outcome.decisions.resize(corpus.size());

  auto [unique, removed] = dedupe(corpus);
  outcome.report.dedup_removed = removed;

  std::vector<FilterDecision> decisions(unique.size());
  parallel_for(unique.size(), threads, [&](std::size_t i) {
    const SegmentPair& pair = unique.pairs[i];
    const std::map<std::string, double>* scores = nullptr;
    if (sidecar != nullptr) {
      if (auto it = sidecar->find(pair.id); it != sidecar->end()) scores = &it->second;
    }
    decisions[i] = filter_pair(pair, effective, scores);
  });

  std::map<std::size_t, std::size_t> position;
  for (std::size_t i = 0; i < corpus.size(); ++i) position.emplace(corpus.pairs[i].id, i);

  for (std::size_t i = 0; i < unique.size(); ++i) {
    const SegmentPair& pair = unique.pairs[i];
    const FilterDecision& decision = decisions[i];
    for (const auto& name : decision.rejected_by) ++outcome.report.per_rule_rejections[name];
    if (decision.accepted) {
      ++outcome.report.accepted;
      SegmentPair kept = pair;
      kept.meta["origin_id"] = pair.meta.contains("origin_id") ? pair.meta.at("origin_id")
                                                               : std::to_string(pair.id);
      kept.id = outcome.accepted.pairs.size();
      outcome.accepted.pairs.push_back(std::move(kept));
    } else {
      ++outcome.report.rejected;
    }
    if (auto it = position.find(pair.id); it != position.end()) {
      outcome.decisions[it->second] = decision;
    }
  }
  return outcome;
}

FilterOutcome run_filter_pipeline(const Corpus& corpus, const FilterConfig& cfg,
                                  const std::optional<std::filesystem::path>& sidecar_path,
                                  std::size_t threads) {
  if (!sidecar_path) return run_filter_pipeline(corpus, cfg, nullptr, threads);
  const ScoreSidecar sidecar = load_score_sidecar(*sidecar_path);
  return run_filter_pipeline(corpus, cfg, &sidecar, threads);
}

std::string format_filter_report(const FilterReport& report) {
  std::ostringstream out;
  out << "total          " << report.total << '\n'
      << "dedup removed  " << report.dedup_removed << '\n'
      << "rejected       " << report.rejected << '\n'
      << "accepted       " << report.accepted << '\n';
  for (const auto& name : filter_rule_names()) {
    auto it = report.per_rule_rejections.find(std::string(name));
    if (it == report.per_rule_rejections.end()) continue;
    out << "  " << name << std::string(20 - std::min<std::size_t>(19, name.size()), ' ')
        << it->second << '\n';
  }
  return out.str();
}

std::string filter_report_json(const FilterReport& report) {
  nlohmann::ordered_json j;
  j["total"] = report.total;
  j["accepted"] = report.accepted;
  j["rejected"] = report.rejected;
  j["dedup_removed"] = report.dedup_removed;
  j["per_rule_rejections"] = report.per_rule_rejections;
  return j.dump();
}

}  // namespace mbrkit
