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

#include "mbrkit/corpus.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "mbrkit/error.hpp"
#include "mbrkit/utf8.hpp"

namespace mbrkit {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIo, "read failed for " + path.string());
  return data;
}

void check_line(const std::string& text, const std::string& what) {
  if (utf8::has_line_break(text)) {
    fail(ErrorCode::kValidation, what + " contains a line break");
  }
}

std::string segment_context(std::size_t line_number) {
  return "line " + std::to_string(line_number);
}

}  // namespace

void validate(const CandidateSet& set) {
  if (set.candidates.empty()) {
    fail(ErrorCode::kValidation,
         "segment " + std::to_string(set.segment_id) + " has no candidates");
  }
  if (set.gen_scores && set.gen_scores->size() != set.candidates.size()) {
    fail(ErrorCode::kValidation, "segment " + std::to_string(set.segment_id) +
                                     " has " + std::to_string(set.gen_scores->size()) +
                                     " scores for " +
                                     std::to_string(set.candidates.size()) + " candidates");
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::string data = read_file(path);
  std::string_view view(data);
  if (view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < view.size()) {
    std::size_t end = view.find('\n', start);
    std::size_t next = end == std::string_view::npos ? view.size() : end + 1;
    if (end == std::string_view::npos) end = view.size();
    std::string_view line = view.substr(start, end - start);
    if (end < view.size() && !line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!utf8::is_valid(line)) {
      fail(ErrorCode::kEncoding,
           path.string() + ": invalid UTF-8 on line " + std::to_string(lines.size() + 1));
    }
    lines.emplace_back(line);
    start = next;
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  for (const auto& line : lines) out << line << '\n';
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Corpus make_corpus(const std::vector<std::string>& sources,
                   const std::vector<std::string>& targets) {
  if (!targets.empty() && targets.size() != sources.size()) {
    fail(ErrorCode::kAlignment, "source has " + std::to_string(sources.size()) +
                                    " lines but target has " +
                                    std::to_string(targets.size()));
  }
  Corpus corpus;
  corpus.pairs.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    SegmentPair pair;
    pair.id = i;
    pair.source = sources[i];
    check_line(pair.source, "source segment " + std::to_string(i));
    if (!targets.empty()) {
      pair.target = targets[i];
      check_line(*pair.target, "target segment " + std::to_string(i));
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

Corpus load_parallel_corpus(const std::filesystem::path& source_path,
                            const std::optional<std::filesystem::path>& target_path) {
  auto sources = read_lines(source_path);
  if (!target_path) return make_corpus(sources);
  auto targets = read_lines(*target_path);
  if (targets.size() != sources.size()) {
    fail(ErrorCode::kAlignment, source_path.string() + " has " +
                                    std::to_string(sources.size()) + " lines but " +
                                    target_path->string() + " has " +
                                    std::to_string(targets.size()));
  }
  return make_corpus(sources, targets);
}

void write_parallel_corpus(const Corpus& corpus, const std::filesystem::path& source_path,
                           const std::filesystem::path& target_path) {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  sources.reserve(corpus.size());
  targets.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    if (!pair.target) {
      fail(ErrorCode::kIncompleteCorpus,
           "segment " + std::to_string(pair.id) + " has no target");
    }
    check_line(pair.source, "source of segment " + std::to_string(pair.id));
    check_line(*pair.target, "target of segment " + std::to_string(pair.id));
    sources.push_back(pair.source);
    targets.push_back(*pair.target);
  }
  write_lines(source_path, sources);
  write_lines(target_path, targets);
}

std::vector<CandidateSet> parse_candidate_sets(const std::vector<std::string>& lines) {
  struct Record {
    std::size_t rank;
    std::string text;
    std::optional<double> score;
    std::size_t line;
  };
  std::map<std::size_t, std::map<std::size_t, Record>> grouped;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_number = i + 1;
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kFormat, segment_context(line_number) + ": " + e.what());
    }
    if (!record.is_object()) {
      fail(ErrorCode::kFormat, segment_context(line_number) + ": expected an object");
    }
    auto require_index = [&](const char* key) -> std::size_t {
      auto it = record.find(key);
      if (it == record.end() || !it->is_number_integer() ||
          it->get<long long>() < 0) {
        fail(ErrorCode::kFormat, segment_context(line_number) + ": field '" + key +
                                     "' must be a non-negative integer");
      }
      return it->get<std::size_t>();
    };
    const std::size_t segment_id = require_index("segment_id");
    const std::size_t rank = require_index("rank");
    auto text_it = record.find("text");
    if (text_it == record.end() || !text_it->is_string()) {
      fail(ErrorCode::kFormat, segment_context(line_number) + ": field 'text' must be a string");
    }
    Record rec{rank, text_it->get<std::string>(), std::nullopt, line_number};
    if (auto score_it = record.find("score"); score_it != record.end() && !score_it->is_null()) {
      if (!score_it->is_number()) {
        fail(ErrorCode::kFormat, segment_context(line_number) + ": field 'score' must be a number");
      }
      rec.score = score_it->get<double>();
    }
    check_line(rec.text, segment_context(line_number) + " text");
    auto& group = grouped[segment_id];
    if (group.contains(rank)) {
      fail(ErrorCode::kFormat, segment_context(line_number) + ": duplicate (segment_id " +
                                   std::to_string(segment_id) + ", rank " +
                                   std::to_string(rank) + ")");
    }
    group.emplace(rank, std::move(rec));
  }

  std::vector<CandidateSet> sets;
  sets.reserve(grouped.size());
  for (auto& [segment_id, records] : grouped) {
    CandidateSet set;
    set.segment_id = segment_id;
    std::size_t expected = 0;
    std::size_t scored = 0;
    std::vector<double> scores;
    for (auto& [rank, rec] : records) {
      if (rank != expected) {
        fail(ErrorCode::kFormat, "segment " + std::to_string(segment_id) +
                                     ": rank " + std::to_string(expected) +
                                     " missing before rank " + std::to_string(rank) +
                                     " (" + segment_context(rec.line) + ")");
      }
      ++expected;
      set.candidates.push_back(std::move(rec.text));
      if (rec.score) {
        ++scored;
        scores.push_back(*rec.score);
      }
    }
    if (scored != 0 && scored != set.candidates.size()) {
      fail(ErrorCode::kFormat, "segment " + std::to_string(segment_id) +
                                   ": score present on some candidates only");
    }
    if (scored != 0) set.gen_scores = std::move(scores);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<CandidateSet> load_candidate_sets(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  try {
    return parse_candidate_sets(lines);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::string> format_candidate_sets(const std::vector<CandidateSet>& sets) {
  std::vector<std::string> lines;
  for (const auto& set : sets) {
    validate(set);
    for (std::size_t rank = 0; rank < set.candidates.size(); ++rank) {
      json record;
      record["segment_id"] = set.segment_id;
      record["rank"] = rank;
      record["text"] = set.candidates[rank];
      if (set.gen_scores) record["score"] = (*set.gen_scores)[rank];
      lines.push_back(record.dump(-1, ' ', false, json::error_handler_t::strict));
    }
  }
  return lines;
}

void write_candidate_sets(const std::vector<CandidateSet>& sets,
                          const std::filesystem::path& path) {
  write_lines(path, format_candidate_sets(sets));
}

ScoreSidecar load_score_sidecar(const std::filesystem::path& path) {
  ScoreSidecar sidecar;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.string() + ": line " + std::to_string(i + 1);
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      fail(ErrorCode::kFormat, where + ": expected segment_id<TAB>name<TAB>value");
    }
    std::string_view id_text(line.data(), tab1);
    std::string name = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::string value_text = line.substr(tab2 + 1);

    std::size_t id = 0;
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc() || ptr != id_text.data() + id_text.size()) {
      fail(ErrorCode::kFormat, where + ": bad segment id '" + std::string(id_text) + "'");
    }
    double value = 0.0;
    std::istringstream value_stream(value_text);
    value_stream.imbue(std::locale::classic());
    if (!(value_stream >> value) || !value_stream.eof()) {
      fail(ErrorCode::kFormat, where + ": bad value '" + value_text + "'");
    }
    if (name.empty()) fail(ErrorCode::kFormat, where + ": empty score name");
    sidecar[id][name] = value;
  }
  return sidecar;
}

}  // namespace mbrkit
