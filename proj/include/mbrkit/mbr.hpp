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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbrkit/corpus.hpp"
#include "mbrkit/metrics.hpp"

namespace mbrkit {

class ScorerClient;

enum class UtilityKind { kChrfSentence, kBleuSentence, kNegEditDistance, kExternal };

/// Pairwise utility u(hypothesis, pseudo-reference). Symmetry is declared, not
/// inferred: only declared-symmetric utilities get their matrix mirrored.
struct UtilityFn {
  UtilityKind kind = UtilityKind::kChrfSentence;
  bool symmetric = false;
  bool needs_source = false;
  ScorerClient* scorer = nullptr;
  ChrfParams chrf;
  BleuParams bleu{4, true};

  static UtilityFn chrf_sentence(ChrfParams params = {});
  static UtilityFn bleu_sentence(BleuParams params = {4, true});
  static UtilityFn neg_edit_distance(bool symmetric = true);
  /// needs_source follows the endpoint's handshake.
  static UtilityFn external(ScorerClient& scorer, bool symmetric = false);

  std::string name() const;
};

/// Parses "chrf", "bleu", "edit"; "external" requires a scorer.
UtilityFn parse_utility(std::string_view name, ScorerClient* scorer = nullptr);

/// values(i, j) = u(candidate i, candidate j as pseudo-reference).
class UtilityMatrix {
 public:
  UtilityMatrix() = default;
  explicit UtilityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  bool operator==(const UtilityMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

UtilityMatrix utility_matrix(std::span<const std::string> candidates,
                             std::optional<std::string_view> source, const UtilityFn& u,
                             std::size_t segment_id = 0);

/// Row means over pseudo-references, summed in index order. With n = 1 and
/// include_self = false the single entry values(0, 0) is returned.
std::vector<double> expected_utilities(const UtilityMatrix& m, bool include_self = true);

/// Lowest index among the maxima. Values within 1e-9 (relative to the maximum's
/// magnitude, at least absolute 1e-9) of the maximum count as tied.
std::size_t argmax_first(std::span<const double> values);

struct MbrResult {
  std::size_t segment_id = 0;
  std::size_t selected_index = 0;
  std::vector<double> expected_utilities;
  std::string selected_text;

  bool operator==(const MbrResult&) const = default;
};

MbrResult mbr_select(std::span<const std::string> candidates,
                     std::optional<std::string_view> source, const UtilityFn& u,
                     bool include_self = true, std::size_t segment_id = 0);

struct DecodeOptions {
  bool include_self = true;
  std::optional<std::size_t> top_k;
  std::size_t threads = 1;
};

/// MBR over the first min(top_k, n) candidates of every set, in input order.
/// `corpus` supplies sources (looked up by segment id) when the utility needs
/// them.
std::vector<MbrResult> mbr_decode_corpus(const std::vector<CandidateSet>& sets,
                                         const Corpus* corpus, const UtilityFn& u,
                                         const DecodeOptions& options = {});

/// Pairs each corpus source with its selected translation. Every result's
/// segment id must exist in `corpus`.
Corpus synthetic_corpus(const std::vector<MbrResult>& results, const Corpus& corpus);

struct SweepRow {
  std::size_t k = 0;            // requested count; 0 = rank-0 candidate, no MBR
  std::size_t effective_k = 0;  // largest prefix actually used by any segment
  double chrf = 0.0;
  double bleu = 0.0;
  std::optional<double> mean_expected_utility;  // absent for the k = 0 row
  double wall_time_ms = 0.0;
};

/// One row per count plus a leading k = 0 row. `references` is aligned with
/// `sets`. A leading 0 in `counts` is accepted and folded into that row.
std::vector<SweepRow> sweep_candidate_counts(const std::vector<CandidateSet>& sets,
                                             const Corpus* corpus,
                                             const std::vector<std::string>& references,
                                             const UtilityFn& u,
                                             const std::vector<std::size_t>& counts,
                                             const DecodeOptions& options = {});

/// Tab-separated, with header; numeric columns fixed to 4 decimals.
std::string format_sweep_table(const std::vector<SweepRow>& rows, bool include_timing = true);

inline const std::vector<std::size_t> kDefaultSweepCounts = {10, 25, 50, 100, 200, 300, 400, 500};

}  // namespace mbrkit
