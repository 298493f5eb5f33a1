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

#include "mbrkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mbrkit/error.hpp"
#include "mbrkit/utf8.hpp"

namespace mbrkit {

namespace {

void check_lengths(std::size_t hyps, std::size_t refs) {
  if (hyps != refs) {
    fail(ErrorCode::kAlignment, std::to_string(hyps) + " hypotheses but " +
                                    std::to_string(refs) + " references");
  }
}

// Floor used by the reference implementation instead of log(0).
double floored_log(double x) { return x == 0.0 ? -9999999999.0 : std::log(x); }

}  // namespace

// ---------------------------------------------------------------------------
// chrF

std::string chrf_signature(const ChrfParams& params) {
  std::ostringstream out;
  out << "chrF" << params.beta << "|nc:" << params.char_order
      << "|nw:0|space:no|eff:" << (params.effective_order ? "yes" : "no");
  return out.str();
}

NGramProfile::NGramProfile(std::string_view text, int max_order)
    : text_(utf8::strip_whitespace(utf8::decode(text))), max_order_(max_order) {
  if (max_order < 1) fail(ErrorCode::kParameter, "char_order must be >= 1");
  orders_.resize(max_order);
  const auto len = static_cast<std::int64_t>(text_.size());
  for (int n = 1; n <= max_order; ++n) {
    std::vector<Entry> grams;
    for (std::int64_t i = 0; i + n <= len; ++i) {
      grams.push_back({static_cast<std::uint32_t>(i), 1});
    }
    std::u32string_view view(text_);
    std::sort(grams.begin(), grams.end(), [&](const Entry& a, const Entry& b) {
      return view.substr(a.offset, n) < view.substr(b.offset, n);
    });
    auto& merged = orders_[n - 1];
    for (const auto& g : grams) {
      if (!merged.empty() &&
          view.substr(merged.back().offset, n) == view.substr(g.offset, n)) {
        ++merged.back().count;
      } else {
        merged.push_back(g);
      }
    }
  }
}

std::int64_t NGramProfile::total(int n) const {
  const auto len = static_cast<std::int64_t>(text_.size());
  return std::max<std::int64_t>(0, len - n + 1);
}

std::size_t NGramProfile::distinct(int n) const { return orders_[n - 1].size(); }

int NGramProfile::compare(const NGramProfile& other, const Entry& a, const Entry& b,
                          int n) const {
  return std::u32string_view(text_).substr(a.offset, n).compare(
      std::u32string_view(other.text_).substr(b.offset, n));
}

std::int64_t NGramProfile::clipped_matches(const NGramProfile& other, int n) const {
  const auto& mine = orders_[n - 1];
  const auto& theirs = other.orders_[n - 1];
  std::int64_t matches = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < mine.size() && j < theirs.size()) {
    const int c = compare(other, mine[i], theirs[j], n);
    if (c < 0) {
      ++i;
    } else if (c > 0) {
      ++j;
    } else {
      matches += std::min(mine[i].count, theirs[j].count);
      ++i;
      ++j;
    }
  }
  return matches;
}

ChrfStats& ChrfStats::operator+=(const ChrfStats& other) {
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    hyp[i] += other.hyp[i];
    ref[i] += other.ref[i];
    match[i] += other.match[i];
  }
  return *this;
}

ChrfStats chrf_statistics(const NGramProfile& hypothesis, const NGramProfile& reference) {
  const int order = std::min(hypothesis.max_order(), reference.max_order());
  ChrfStats stats(order);
  for (int n = 1; n <= order; ++n) {
    const std::int64_t ref_total = reference.total(n);
    // Hypothesis n-grams are not counted at orders the reference lacks.
    stats.hyp[n - 1] = ref_total > 0 ? hypothesis.total(n) : 0;
    stats.ref[n - 1] = ref_total;
    stats.match[n - 1] = hypothesis.clipped_matches(reference, n);
  }
  return stats;
}

ChrfStats chrf_statistics(std::string_view hypothesis, std::string_view reference,
                          int char_order) {
  return chrf_statistics(NGramProfile(hypothesis, char_order),
                         NGramProfile(reference, char_order));
}

double chrf_from_statistics(const ChrfStats& stats, const ChrfParams& params) {
  constexpr double kEps = 1e-16;
  const double factor = params.beta * params.beta;
  const int order = static_cast<int>(stats.hyp.size());
  double smoothed = 0.0;
  double avg_prec = 0.0;
  double avg_rec = 0.0;
  int effective = 0;
  for (int i = 0; i < order; ++i) {
    const auto n_hyp = stats.hyp[i];
    const auto n_ref = stats.ref[i];
    const auto n_match = stats.match[i];
    const double prec = n_hyp > 0 ? static_cast<double>(n_match) / n_hyp : kEps;
    const double rec = n_ref > 0 ? static_cast<double>(n_match) / n_ref : kEps;
    const double denom = factor * prec + rec;
    smoothed += denom > 0 ? (1 + factor) * prec * rec / denom : kEps;
    if (n_hyp > 0 && n_ref > 0) {
      avg_prec += prec;
      avg_rec += rec;
      ++effective;
    }
  }
  if (!params.effective_order) return 100 * smoothed / order;
  if (effective == 0) {
    avg_prec = avg_rec = 0.0;
  } else {
    avg_prec /= effective;
    avg_rec /= effective;
  }
  if (avg_prec + avg_rec == 0.0) return 0.0;
  double score = (1 + factor) * avg_prec * avg_rec;
  score /= (factor * avg_prec) + avg_rec;
  return 100 * score;
}

double chrf_sentence(std::string_view hypothesis, std::string_view reference,
                     const ChrfParams& params) {
  if (params.char_order < 1) fail(ErrorCode::kParameter, "char_order must be >= 1");
  return chrf_from_statistics(chrf_statistics(hypothesis, reference, params.char_order),
                              params);
}

MetricScore chrf_corpus(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references,
                        const ChrfParams& params) {
  if (params.char_order < 1) fail(ErrorCode::kParameter, "char_order must be >= 1");
  check_lengths(hypotheses.size(), references.size());
  ChrfStats totals(params.char_order);
  std::vector<double> sentences;
  sentences.reserve(hypotheses.size());
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto stats = chrf_statistics(hypotheses[i], references[i], params.char_order);
    sentences.push_back(chrf_from_statistics(stats, params));
    totals += stats;
  }
  return {chrf_from_statistics(totals, params), std::move(sentences), chrf_signature(params)};
}

// ---------------------------------------------------------------------------
// BLEU

namespace {

void replace_all(std::u32string& text, std::u32string_view from, std::u32string_view to) {
  if (from.empty()) return;
  std::u32string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(from, pos);
    if (hit == std::u32string::npos) break;
    out.append(text, pos, hit - pos);
    out.append(to);
    pos = hit + from.size();
  }
  out.append(text, pos, std::u32string::npos);
  text = std::move(out);
}

// Characters that 13a always splits off as standalone tokens.
bool is_split_symbol(char32_t c) {
  return (c >= 0x7B && c <= 0x7E) || (c >= 0x5B && c <= 0x60) || (c >= 0x20 && c <= 0x26) ||
         (c >= 0x28 && c <= 0x2B) || (c >= 0x3A && c <= 0x40) || c == U'/';
}

bool is_period_or_comma(char32_t c) { return c == U'.' || c == U','; }

// Emulates a left-to-right, non-overlapping substitution of a two-character
// pattern `first second` by `prefix first middle second suffix`.
template <typename First, typename Second>
std::u32string substitute_pairs(const std::u32string& text, First first, Second second,
                                std::u32string_view prefix, std::u32string_view middle,
                                std::u32string_view suffix) {
  std::u32string out;
  out.reserve(text.size() + text.size() / 2);
  std::size_t i = 0;
  while (i < text.size()) {
    if (i + 1 < text.size() && first(text[i]) && second(text[i + 1])) {
      out.append(prefix);
      out.push_back(text[i]);
      out.append(middle);
      out.push_back(text[i + 1]);
      out.append(suffix);
      i += 2;
    } else {
      out.push_back(text[i]);
      ++i;
    }
  }
  return out;
}

std::string join_ngram(const std::vector<std::string>& tokens, std::size_t start, int n) {
  std::string key = tokens[start];
  for (int k = 1; k < n; ++k) {
    key.push_back(' ');
    key += tokens[start + k];
  }
  return key;
}

}  // namespace

std::vector<std::string> tokenize_13a(std::string_view text) {
  std::u32string line = utf8::decode(text);
  replace_all(line, U"<skipped>", U"");
  replace_all(line, U"-\n", U"");
  replace_all(line, U"\n", U" ");
  if (line.find(U'&') != std::u32string::npos) {
    replace_all(line, U"&quot;", U"\"");
    replace_all(line, U"&amp;", U"&");
    replace_all(line, U"&lt;", U"<");
    replace_all(line, U"&gt;", U">");
  }

  std::u32string padded;
  padded.reserve(line.size() * 2 + 2);
  padded.push_back(U' ');
  for (char32_t c : line) {
    if (is_split_symbol(c)) {
      padded.push_back(U' ');
      padded.push_back(c);
      padded.push_back(U' ');
    } else {
      padded.push_back(c);
    }
  }
  padded.push_back(U' ');

  auto not_digit = [](char32_t c) { return !utf8::is_ascii_digit(c); };
  auto digit = [](char32_t c) { return utf8::is_ascii_digit(c); };
  auto hyphen = [](char32_t c) { return c == U'-'; };
  padded = substitute_pairs(padded, not_digit, is_period_or_comma, U"", U" ", U" ");
  padded = substitute_pairs(padded, is_period_or_comma, not_digit, U" ", U" ", U"");
  padded = substitute_pairs(padded, digit, hyphen, U"", U" ", U" ");

  std::vector<std::string> tokens;
  for (auto word : utf8::split_whitespace(padded)) tokens.push_back(utf8::encode(word));
  return tokens;
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  sys_len += other.sys_len;
  ref_len += other.ref_len;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    correct[i] += other.correct[i];
    total[i] += other.total[i];
  }
  return *this;
}

TokenProfile::TokenProfile(std::string_view text, int max_order) : max_order_(max_order) {
  if (max_order < 1) fail(ErrorCode::kParameter, "max_order must be >= 1");
  const auto tokens = tokenize_13a(utf8::encode(utf8::rstrip(utf8::decode(text))));
  length_ = static_cast<std::int64_t>(tokens.size());
  orders_.resize(max_order);
  for (int n = 1; n <= max_order; ++n) {
    std::map<std::string, std::int64_t> counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[join_ngram(tokens, i, n)];
    orders_[n - 1].assign(counts.begin(), counts.end());
  }
}

BleuStats bleu_statistics(const TokenProfile& hypothesis, const TokenProfile& reference) {
  const int order = std::min(hypothesis.max_order_, reference.max_order_);
  BleuStats stats(order);
  stats.sys_len = hypothesis.length_;
  stats.ref_len = reference.length_;
  for (int n = 0; n < order; ++n) {
    const auto& hyp = hypothesis.orders_[n];
    const auto& ref = reference.orders_[n];
    std::size_t j = 0;
    for (const auto& [gram, count] : hyp) {
      stats.total[n] += count;
      while (j < ref.size() && ref[j].first < gram) ++j;
      if (j < ref.size() && ref[j].first == gram) stats.correct[n] += std::min(count, ref[j].second);
    }
  }
  return stats;
}

BleuStats bleu_statistics(std::string_view hypothesis, std::string_view reference,
                          int max_order) {
  return bleu_statistics(TokenProfile(hypothesis, max_order),
                         TokenProfile(reference, max_order));
}

double bleu_from_statistics(const BleuStats& stats, const BleuParams& params) {
  const int max_order = params.max_order;
  double bp = 1.0;
  if (stats.sys_len < stats.ref_len) {
    bp = stats.sys_len > 0
             ? std::exp(1.0 - static_cast<double>(stats.ref_len) / stats.sys_len)
             : 0.0;
  }
  if (std::all_of(stats.correct.begin(), stats.correct.end(),
                  [](std::int64_t c) { return c == 0; })) {
    return 0.0;
  }
  std::vector<double> precisions(max_order, 0.0);
  double smooth = 1.0;
  int eff_order = max_order;
  for (int n = 1; n <= max_order; ++n) {
    const auto total = stats.total[n - 1];
    const auto correct = stats.correct[n - 1];
    if (total == 0) break;
    if (params.effective_order) eff_order = n;
    if (correct == 0) {
      smooth *= 2;
      precisions[n - 1] = 100.0 / (smooth * total);
    } else {
      precisions[n - 1] = 100.0 * correct / total;
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < eff_order; ++n) log_sum += floored_log(precisions[n]);
  return bp * std::exp(log_sum / eff_order);
}

double bleu_sentence(std::string_view hypothesis, std::string_view reference,
                     const BleuParams& params) {
  if (params.max_order < 1) fail(ErrorCode::kParameter, "max_order must be >= 1");
  return bleu_from_statistics(bleu_statistics(hypothesis, reference, params.max_order),
                              params);
}

MetricScore bleu_corpus(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references,
                        const BleuParams& params) {
  if (params.max_order < 1) fail(ErrorCode::kParameter, "max_order must be >= 1");
  check_lengths(hypotheses.size(), references.size());
  BleuStats totals(params.max_order);
  std::vector<double> sentences;
  sentences.reserve(hypotheses.size());
  const BleuParams sentence_params{params.max_order, true};
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto stats = bleu_statistics(hypotheses[i], references[i], params.max_order);
    sentences.push_back(bleu_from_statistics(stats, sentence_params));
    totals += stats;
  }
  return {bleu_from_statistics(totals, params), std::move(sentences),
          std::string(kBleuSignature)};
}

// ---------------------------------------------------------------------------

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      const std::size_t substitution = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({above + 1, row[j - 1] + 1, substitution});
      diagonal = above;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(utf8::decode(a), utf8::decode(b));
}

}  // namespace mbrkit
