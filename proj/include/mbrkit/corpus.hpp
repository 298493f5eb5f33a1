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
#include <vector>

namespace mbrkit {

/// One aligned sentence pair. Text is UTF-8 without line breaks.
struct SegmentPair {
  std::size_t id = 0;
  std::string source;
  std::optional<std::string> target;
  std::map<std::string, std::string> meta;

  bool operator==(const SegmentPair&) const = default;
};

struct Corpus {
  std::vector<SegmentPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool operator==(const Corpus&) const = default;
};

/// N-best hypotheses for one source segment; index 0 is the generator's best.
struct CandidateSet {
  std::size_t segment_id = 0;
  std::vector<std::string> candidates;
  std::optional<std::vector<double>> gen_scores;

  std::size_t size() const { return candidates.size(); }
  bool operator==(const CandidateSet&) const = default;
};

/// Throws a validation error when a set is empty or its scores are misaligned.
void validate(const CandidateSet& set);

/// segment id -> score name -> value
using ScoreSidecar = std::map<std::size_t, std::map<std::string, double>>;

/// Reads a UTF-8 text file into lines. A leading byte-order mark is dropped,
/// as is each line's terminator ("\n" or "\r\n"); nothing else is trimmed.
std::vector<std::string> read_lines(const std::filesystem::path& path);

void write_lines(const std::filesystem::path& path,
                 const std::vector<std::string>& lines);

Corpus load_parallel_corpus(
    const std::filesystem::path& source_path,
    const std::optional<std::filesystem::path>& target_path = std::nullopt);

void write_parallel_corpus(const Corpus& corpus,
                           const std::filesystem::path& source_path,
                           const std::filesystem::path& target_path);

/// Builds a corpus from in-memory lines, assigning ids 0..n-1.
Corpus make_corpus(const std::vector<std::string>& sources,
                   const std::vector<std::string>& targets = {});

/// Candidate files hold one JSON object per line:
///   {"segment_id": 3, "rank": 0, "text": "...", "score": -1.25}
/// Records are grouped by segment and ordered by rank; rank sequences must be
/// gap-free starting at 0.
std::vector<CandidateSet> load_candidate_sets(const std::filesystem::path& path);
std::vector<CandidateSet> parse_candidate_sets(const std::vector<std::string>& lines);

void write_candidate_sets(const std::vector<CandidateSet>& sets,
                          const std::filesystem::path& path);
std::vector<std::string> format_candidate_sets(const std::vector<CandidateSet>& sets);

/// Tab-separated `segment_id<TAB>name<TAB>value` lines.
ScoreSidecar load_score_sidecar(const std::filesystem::path& path);

}  // namespace mbrkit
