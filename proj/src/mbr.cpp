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

#include "mbrkit/mbr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "mbrkit/error.hpp"
#include "mbrkit/parallel.hpp"
#include "mbrkit/scorer.hpp"
#include "mbrkit/utf8.hpp"

namespace mbrkit {

UtilityFn UtilityFn::chrf_sentence(ChrfParams params) {
  UtilityFn u;
  u.kind = UtilityKind::kChrfSentence;
  u.chrf = params;
  return u;
}

UtilityFn UtilityFn::bleu_sentence(BleuParams params) {
  UtilityFn u;
  u.kind = UtilityKind::kBleuSentence;
  u.bleu = params;
  return u;
}

UtilityFn UtilityFn::neg_edit_distance(bool symmetric) {
  UtilityFn u;
  u.kind = UtilityKind::kNegEditDistance;
  u.symmetric = symmetric;
  return u;
}

UtilityFn UtilityFn::external(ScorerClient& scorer, bool symmetric) {
  UtilityFn u;
  u.kind = UtilityKind::kExternal;
  u.scorer = &scorer;
  u.symmetric = symmetric;
  u.needs_source = scorer.handshake().needs_src;
  return u;
}

std::string UtilityFn::name() const {
  switch (kind) {
    case UtilityKind::kChrfSentence: return "chrf";
    case UtilityKind::kBleuSentence: return "bleu";
    case UtilityKind::kNegEditDistance: return "edit";
    case UtilityKind::kExternal: return "external";
  }
  return "unknown";
}

UtilityFn parse_utility(std::string_view name, ScorerClient* scorer) {
  if (name == "chrf") return UtilityFn::chrf_sentence();
  if (name == "bleu") return UtilityFn::bleu_sentence();
  if (name == "edit") return UtilityFn::neg_edit_distance();
  if (name == "external") {
    if (scorer == nullptr) {
      fail(ErrorCode::kConfiguration, "utility 'external' needs a scorer endpoint");
    }
    return UtilityFn::external(*scorer);
  }
  fail(ErrorCode::kConfiguration,
       "unknown utility '" + std::string(name) + "' (expected chrf, bleu, edit or external)");
}

namespace {

std::string pair_context(std::size_t segment_id, std::size_t i, std::size_t j) {
  return "segment " + std::to_string(segment_id) + " pair (" + std::to_string(i) + "," +
         std::to_string(j) + ")";
}

// Fills `m` by calling score(i, j) for every pair that has to be computed.
template <typename Score>
void fill_local(UtilityMatrix& m, bool symmetric, Score&& score) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = symmetric ? i : 0; j < n; ++j) {
      m(i, j) = score(i, j);
      if (symmetric) m(j, i) = m(i, j);
    }
  }
}

}  // namespace

UtilityMatrix utility_matrix(std::span<const std::string> candidates,
                             std::optional<std::string_view> source, const UtilityFn& u,
                             std::size_t segment_id) {
  if (candidates.empty()) {
    fail(ErrorCode::kValidation, "segment " + std::to_string(segment_id) + " has no candidates");
  }
  if (u.needs_source && !source) {
    fail(ErrorCode::kAlignment, "segment " + std::to_string(segment_id) +
                                    ": utility needs a source sentence");
  }
  const std::size_t n = candidates.size();
  UtilityMatrix m(n);

  switch (u.kind) {
    case UtilityKind::kChrfSentence: {
      if (u.chrf.char_order < 1) fail(ErrorCode::kParameter, "char_order must be >= 1");
      std::vector<NGramProfile> profiles;
      profiles.reserve(n);
      for (const auto& c : candidates) profiles.emplace_back(c, u.chrf.char_order);
      fill_local(m, u.symmetric, [&](std::size_t i, std::size_t j) {
        return chrf_from_statistics(chrf_statistics(profiles[i], profiles[j]), u.chrf);
      });
      break;
    }
    case UtilityKind::kBleuSentence: {
      std::vector<TokenProfile> profiles;
      profiles.reserve(n);
      for (const auto& c : candidates) profiles.emplace_back(c, u.bleu.max_order);
      fill_local(m, u.symmetric, [&](std::size_t i, std::size_t j) {
        return bleu_from_statistics(bleu_statistics(profiles[i], profiles[j]), u.bleu);
      });
      break;
    }
    case UtilityKind::kNegEditDistance: {
      std::vector<std::u32string> decoded;
      decoded.reserve(n);
      for (const auto& c : candidates) decoded.push_back(utf8::decode(c));
      fill_local(m, u.symmetric, [&](std::size_t i, std::size_t j) {
        return -static_cast<double>(levenshtein(decoded[i], decoded[j]));
      });
      break;
    }
    case UtilityKind::kExternal: {
      if (u.scorer == nullptr) {
        fail(ErrorCode::kConfiguration, "external utility has no scorer endpoint");
      }
      std::vector<ScoreRequest> requests;
      std::vector<std::pair<std::size_t, std::size_t>> cells;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = u.symmetric ? i : 0; j < n; ++j) {
          ScoreRequest r;
          if (source) r.src = std::string(*source);
          r.mt = candidates[i];
          r.ref = candidates[j];
          requests.push_back(std::move(r));
          cells.emplace_back(i, j);
        }
      }
      std::vector<double> scores;
      try {
        scores = u.scorer->score(requests);
      } catch (const Error& e) {
        throw Error(e.code(), "segment " + std::to_string(segment_id) + ": " + e.what());
      }
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto [i, j] = cells[k];
        m(i, j) = scores[k];
        if (u.symmetric) m(j, i) = scores[k];
      }
      break;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(m(i, j))) {
        fail(ErrorCode::kValidation, "non-finite utility at " + pair_context(segment_id, i, j));
      }
    }
  }
  return m;
}

std::vector<double> expected_utilities(const UtilityMatrix& m, bool include_self) {
  const std::size_t n = m.size();
  std::vector<double> scores(n, 0.0);
  if (n == 1 && !include_self) {
    scores[0] = m(0, 0);
    return scores;
  }
  const double denom = static_cast<double>(include_self ? n : n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i && !include_self) continue;
      sum += m(i, j);
    }
    scores[i] = sum / denom;
  }
  return scores;
}

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) return 0;
  const double top = *std::max_element(values.begin(), values.end());
  const double tolerance = 1e-9 * std::max(1.0, std::abs(top));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= top - tolerance) return i;
  }
  return 0;
}

MbrResult mbr_select(std::span<const std::string> candidates,
                     std::optional<std::string_view> source, const UtilityFn& u,
                     bool include_self, std::size_t segment_id) {
  const UtilityMatrix m = utility_matrix(candidates, source, u, segment_id);
  MbrResult result;
  result.segment_id = segment_id;
  result.expected_utilities = expected_utilities(m, include_self);
  result.selected_index = argmax_first(result.expected_utilities);
  result.selected_text = candidates[result.selected_index];
  return result;
}

namespace {

std::map<std::size_t, const SegmentPair*> index_corpus(const Corpus& corpus) {
  std::map<std::size_t, const SegmentPair*> by_id;
  for (const auto& pair : corpus.pairs) by_id[pair.id] = &pair;
  return by_id;
}

}  // namespace

std::vector<MbrResult> mbr_decode_corpus(const std::vector<CandidateSet>& sets,
                                         const Corpus* corpus, const UtilityFn& u,
                                         const DecodeOptions& options) {
  if (options.top_k && *options.top_k < 1) fail(ErrorCode::kParameter, "top_k must be >= 1");
  if (u.needs_source && corpus == nullptr) {
    fail(ErrorCode::kConfiguration, "utility '" + u.name() + "' needs source sentences");
  }
  std::map<std::size_t, const SegmentPair*> by_id;
  if (corpus != nullptr) by_id = index_corpus(*corpus);
  if (u.needs_source) {
    for (const auto& set : sets) {
      if (!by_id.contains(set.segment_id)) {
        fail(ErrorCode::kAlignment,
             "segment " + std::to_string(set.segment_id) + " is missing from the source corpus");
      }
    }
  }

  std::vector<MbrResult> results(sets.size());
  parallel_for(sets.size(), options.threads, [&](std::size_t s) {
    const CandidateSet& set = sets[s];
    validate(set);
    std::size_t k = set.size();
    if (options.top_k) k = std::min(k, *options.top_k);
    std::optional<std::string_view> source;
    if (auto it = by_id.find(set.segment_id); it != by_id.end()) source = it->second->source;
    results[s] = mbr_select(std::span<const std::string>(set.candidates.data(), k),
                            u.needs_source ? source : std::nullopt, u, options.include_self,
                            set.segment_id);
  });
  return results;
}

Corpus synthetic_corpus(const std::vector<MbrResult>& results, const Corpus& corpus) {
  const auto by_id = index_corpus(corpus);
  Corpus out;
  out.pairs.reserve(results.size());
  for (const auto& result : results) {
    const auto it = by_id.find(result.segment_id);
    if (it == by_id.end()) {
      fail(ErrorCode::kAlignment,
           "segment " + std::to_string(result.segment_id) + " is missing from the corpus");
    }
    SegmentPair pair;
    pair.id = out.pairs.size();
    pair.source = it->second->source;
    pair.target = result.selected_text;
    pair.meta = it->second->meta;
    pair.meta["origin_id"] = std::to_string(it->second->id);
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

std::vector<SweepRow> sweep_candidate_counts(const std::vector<CandidateSet>& sets,
                                             const Corpus* corpus,
                                             const std::vector<std::string>& references,
                                             const UtilityFn& u,
                                             const std::vector<std::size_t>& counts,
                                             const DecodeOptions& options) {
  if (references.empty() && !sets.empty()) {
    fail(ErrorCode::kConfiguration, "sweep needs references to evaluate selections");
  }
  if (references.size() != sets.size()) {
    fail(ErrorCode::kAlignment, std::to_string(sets.size()) + " candidate sets but " +
                                    std::to_string(references.size()) + " references");
  }
  std::vector<std::size_t> ks = counts;
  if (!ks.empty() && ks.front() == 0) ks.erase(ks.begin());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1])) {
      fail(ErrorCode::kConfiguration, "sweep counts must be positive and strictly increasing");
    }
  }

  auto evaluate = [&](const std::vector<std::string>& hyps, SweepRow& row) {
    row.chrf = chrf_corpus(hyps, references).corpus_value;
    row.bleu = bleu_corpus(hyps, references).corpus_value;
  };

  std::vector<SweepRow> rows;
  {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> hyps;
    hyps.reserve(sets.size());
    for (const auto& set : sets) {
      validate(set);
      hyps.push_back(set.candidates.front());
    }
    SweepRow row;
    row.k = 0;
    row.effective_k = 0;
    evaluate(hyps, row);
    row.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
  }
  for (std::size_t k : ks) {
    const auto start = std::chrono::steady_clock::now();
    DecodeOptions decode = options;
    decode.top_k = k;
    const auto results = mbr_decode_corpus(sets, corpus, u, decode);
    SweepRow row;
    row.k = k;
    std::vector<std::string> hyps;
    hyps.reserve(results.size());
    double utility_sum = 0.0;
    for (std::size_t s = 0; s < results.size(); ++s) {
      row.effective_k = std::max(row.effective_k, std::min(k, sets[s].size()));
      hyps.push_back(results[s].selected_text);
      utility_sum += results[s].expected_utilities[results[s].selected_index];
    }
    row.mean_expected_utility =
        results.empty() ? 0.0 : utility_sum / static_cast<double>(results.size());
    evaluate(hyps, row);
    row.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows, bool include_timing) {
  std::ostringstream out;
  out << "k\teffective_k\tchrF\tBLEU\tmean_expected_utility\twall_time_ms\n";
  char buffer[64];
  auto fixed = [&](double v) {
    std::snprintf(buffer, sizeof buffer, "%.4f", v);
    return std::string(buffer);
  };
  for (const auto& row : rows) {
    out << row.k << '\t' << row.effective_k << '\t' << fixed(row.chrf) << '\t' << fixed(row.bleu)
        << '\t' << (row.mean_expected_utility ? fixed(*row.mean_expected_utility) : "NA") << '\t'
        << (include_timing ? fixed(row.wall_time_ms) : "NA") << '\n';
  }
  return out.str();
}

}  // namespace mbrkit
