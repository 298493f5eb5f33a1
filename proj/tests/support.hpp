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
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "mbrkit/corpus.hpp"
#include "mbrkit/error.hpp"

namespace mbrkit::testing {

inline std::filesystem::path data_dir() { return MBRKIT_TEST_DATA_DIR; }

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mbrkit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Code of the mbrkit::Error thrown by fn; throws std::logic_error if none.
inline ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("no error raised");
}

inline std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "the",    "a",       "cat",   "dog",    "sat",   "on",     "mat",     "house",
      "river",  "green",   "small", "quickly", "jumps", "over",  "lazy",    "bright",
      "morning", "station", "train", "late",  "again", "under",  "bridge",  "water",
      "cold",   "warm",    "city",  "north",  "south", "road",   "market",  "bread",
      "we",     "they",    "saw",   "found",  "near",  "window", "garden",  "letter",
      "über",   "café",    "naïve", "año",    "3.5",   "km",     "2024",    "–"};
  return words;
}

/// Uniform in [lo, hi] without the library's distribution classes, so frozen
/// values do not depend on the standard library in use.
inline std::size_t uniform(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  const std::uint64_t span = hi - lo + 1;
  const std::uint64_t threshold = (0 - span) % span;
  while (true) {
    const std::uint64_t x = rng();
    if (x >= threshold) return lo + static_cast<std::size_t>(x % span);
  }
}

/// Seeded sentence of `min_words`..`max_words` vocabulary words.
inline std::string random_sentence(std::mt19937_64& rng, std::size_t min_words = 3,
                                   std::size_t max_words = 12) {
  std::string out;
  const std::size_t n = uniform(rng, min_words, max_words);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += vocabulary()[uniform(rng, 0, vocabulary().size() - 1)];
  }
  return out;
}

/// Random candidate set of size 1..max_n; some candidates repeat.
inline std::vector<std::string> random_candidates(std::mt19937_64& rng, std::size_t max_n) {
  const std::size_t n = uniform(rng, 1, max_n);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && rng() % 6 == 0) {
      out.push_back(out[rng() % out.size()]);
    } else {
      out.push_back(random_sentence(rng, 1, 8));
    }
  }
  return out;
}

/// Reference corpus for the desk-scale runs, ids 0..n-1.
inline Corpus mock_reference_corpus(std::size_t segments, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> sources, targets;
  for (std::size_t i = 0; i < segments; ++i) {
    sources.push_back("src " + std::to_string(i) + " " + random_sentence(rng, 4, 10));
    targets.push_back(random_sentence(rng, 5, 14));
  }
  return make_corpus(sources, targets);
}

}  // namespace mbrkit::testing
