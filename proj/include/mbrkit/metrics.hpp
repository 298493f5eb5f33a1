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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mbrkit {

inline constexpr std::string_view kChrfSignature = "chrF2|nc:6|nw:0|space:no|eff:yes";
inline constexpr std::string_view kBleuSignature = "BLEU|tok:13a|smooth:exp";

struct MetricScore {
  double corpus_value = 0.0;
  std::optional<std::vector<double>> sentence_values;
  std::string signature;
};

// ---------------------------------------------------------------------------
// chrF

struct ChrfParams {
  int char_order = 6;
  double beta = 2.0;
  /// Average precision/recall only over orders where both sides have n-grams.
  /// When false, falls back to per-order epsilon smoothing.
  bool effective_order = true;
};

std::string chrf_signature(const ChrfParams& params);

/// Character n-gram multisets of a whitespace-stripped string, orders
/// 1..max_order. Building one per candidate lets MBR reuse it across all
/// pairings.
class NGramProfile {
 public:
  NGramProfile(std::string_view text, int max_order);

  int max_order() const { return max_order_; }
  /// Number of n-grams of order n (= max(0, len - n + 1)).
  std::int64_t total(int n) const;
  /// Number of distinct n-grams of order n.
  std::size_t distinct(int n) const;
  /// Sum over shared n-grams of min(count here, count in other).
  std::int64_t clipped_matches(const NGramProfile& other, int n) const;

 private:
  struct Entry {
    std::uint32_t offset;
    std::uint32_t count;
  };
  int compare(const NGramProfile& other, const Entry& a, const Entry& b, int n) const;

  std::u32string text_;
  int max_order_;
  std::vector<std::vector<Entry>> orders_;  // sorted by n-gram content
};

/// Per-order sufficient statistics: {hyp n-grams, ref n-grams, matches}.
struct ChrfStats {
  std::vector<std::int64_t> hyp;
  std::vector<std::int64_t> ref;
  std::vector<std::int64_t> match;

  explicit ChrfStats(int order = 6) : hyp(order, 0), ref(order, 0), match(order, 0) {}
  ChrfStats& operator+=(const ChrfStats& other);
};

ChrfStats chrf_statistics(const NGramProfile& hypothesis, const NGramProfile& reference);
ChrfStats chrf_statistics(std::string_view hypothesis, std::string_view reference,
                          int char_order = 6);
double chrf_from_statistics(const ChrfStats& stats, const ChrfParams& params = {});

double chrf_sentence(std::string_view hypothesis, std::string_view reference,
                     const ChrfParams& params = {});

MetricScore chrf_corpus(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references,
                        const ChrfParams& params = {});

// ---------------------------------------------------------------------------
// BLEU

/// mteval-v13a tokenization as done by sacreBLEU's "13a" tokenizer.
std::vector<std::string> tokenize_13a(std::string_view text);

struct BleuParams {
  int max_order = 4;
  /// Truncate the geometric mean at the highest order with any hypothesis
  /// n-grams. Sentence-level scoring turns this on by default.
  bool effective_order = false;
};

struct BleuStats {
  std::int64_t sys_len = 0;
  std::int64_t ref_len = 0;
  std::vector<std::int64_t> correct;
  std::vector<std::int64_t> total;

  explicit BleuStats(int order = 4) : correct(order, 0), total(order, 0) {}
  BleuStats& operator+=(const BleuStats& other);
};

/// Pre-tokenized n-gram counts for one sentence.
class TokenProfile {
 public:
  TokenProfile(std::string_view text, int max_order);
  std::int64_t length() const { return length_; }

 private:
  friend BleuStats bleu_statistics(const TokenProfile&, const TokenProfile&);
  int max_order_;
  std::int64_t length_ = 0;
  std::vector<std::vector<std::pair<std::string, std::int64_t>>> orders_;  // sorted
};

BleuStats bleu_statistics(const TokenProfile& hypothesis, const TokenProfile& reference);
BleuStats bleu_statistics(std::string_view hypothesis, std::string_view reference,
                          int max_order = 4);
/// Smoothed ("exp") BLEU from sufficient statistics.
double bleu_from_statistics(const BleuStats& stats, const BleuParams& params);

double bleu_sentence(std::string_view hypothesis, std::string_view reference,
                     const BleuParams& params = {4, true});

MetricScore bleu_corpus(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references,
                        const BleuParams& params = {});

// ---------------------------------------------------------------------------

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace mbrkit
