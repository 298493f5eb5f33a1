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

#include <doctest.h>

#include <random>
#include <set>

#include "mbrkit/filter.hpp"
#include "filter_fixture.hpp"
#include "support.hpp"

using namespace mbrkit;
using testing::one_violation_each;
using testing::repeat_words;

namespace {

Corpus random_corpus(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> src, tgt;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = testing::random_sentence(rng, 0, 30);
    std::string t = rng() % 8 == 0 ? s : testing::random_sentence(rng, 0, 30);
    if (rng() % 10 == 0) s += " 12345 678";
    if (rng() % 10 == 0) t += " supercalifragilisticexpialidocious";
    src.push_back(s);
    tgt.push_back(t);
  }
  if (n > 3) {
    src[n - 1] = src[0];
    tgt[n - 1] = tgt[0];
  }
  return make_corpus(src, tgt);
}

std::set<std::string> origin_ids(const Corpus& c) {
  std::set<std::string> ids;
  for (const auto& p : c.pairs) ids.insert(p.meta.at("origin_id"));
  return ids;
}

}  // namespace

TEST_CASE("measure") {
  const auto s = measure("a1 2b c3 d4");
  CHECK(s.chars == 11);
  CHECK(s.non_space_chars == 8);
  CHECK(s.digits == 4);
  CHECK(s.digit_ratio == doctest::Approx(0.5));
  CHECK(s.words == 4);
  CHECK(s.longest_word == 2);
  CHECK(s.avg_word_len == doctest::Approx(2.0));
  const auto empty = measure("   ");
  CHECK(empty.digit_ratio == 0.0);
  CHECK(empty.avg_word_len == 0.0);
  CHECK(measure("čaj ٣").digits == 0);
}

TEST_CASE("single-rule examples") {
  const FilterConfig cfg;
  SegmentPair p;
  p.source = std::string(501, 'a');
  p.target = "a normal target";
  auto d = filter_pair(p, cfg);
  CHECK(std::count(d.rejected_by.begin(), d.rejected_by.end(), "max_chars") == 1);

  p.source = "identical text";
  p.target = "identical text";
  d = filter_pair(p, cfg);
  CHECK(d.rejected_by == std::vector<std::string>{"min_edit_distance"});

  p.source = "a1 2b c3 d4";
  p.target = "some target words";
  d = filter_pair(p, cfg);
  CHECK(d.rejected_by == std::vector<std::string>{"max_digit_ratio"});
}

TEST_CASE("constructed corpus: one violation per rule") {
  ScoreSidecar sidecar;
  const Corpus corpus = one_violation_each(sidecar);
  FilterConfig cfg;
  cfg.min_bicleaner = 0.5;
  const auto out = run_filter_pipeline(corpus, cfg, &sidecar);
  CHECK(out.report.total == 10);
  CHECK(out.report.accepted == 1);
  CHECK(out.report.rejected == 9);
  CHECK(out.report.dedup_removed == 0);
  CHECK(out.report.reconciles());
  std::map<std::string, std::size_t> expected;
  for (auto name : filter_rule_names()) expected[std::string(name)] = 1;
  CHECK(out.report.per_rule_rejections == expected);
  for (std::size_t i = 0; i < 9; ++i) {
    REQUIRE(out.decisions[i].has_value());
    CHECK(out.decisions[i]->rejected_by ==
          std::vector<std::string>{std::string(filter_rule_names()[i])});
  }
  REQUIRE(out.accepted.size() == 1);
  CHECK(out.accepted.pairs[0].meta.at("origin_id") == "9");
  CHECK(out.accepted.pairs[0].id == 0);
}

TEST_CASE("thresholds are inclusive") {
  const FilterConfig cfg;
  SegmentPair p;
  std::string five_hundred = repeat_words("abcde", 83) + " ab";
  REQUIRE(five_hundred.size() == 500);
  p.source = five_hundred;
  p.target = "a normal target sentence";
  CHECK(filter_pair(p, cfg).accepted);

  p.source = "abcd1 efgh2 ijkl3 mnopq";
  REQUIRE(measure(p.source).non_space_chars == 20);
  REQUIRE(measure(p.source).digits == 3);
  CHECK(filter_pair(p, cfg).accepted);

  p.source = "the cat sat";
  p.target = "the bat sit";
  CHECK(filter_pair(p, cfg).accepted);

  p.source = "hello";
  p.target = "world";
  CHECK(filter_pair(p, cfg).accepted);

  p.source = std::string(28, 'x') + " y";
  p.target = "fine target";
  CHECK(filter_pair(p, cfg).accepted);
  p.source = repeat_words("w", 100);
  CHECK(filter_pair(p, cfg).accepted);
}

TEST_CASE("every broken rule is reported") {
  const FilterConfig cfg;
  SegmentPair p;
  p.source = repeat_words("1234567", 101);
  p.target = p.source;
  const auto d = filter_pair(p, cfg);
  CHECK(d.rejected_by ==
        std::vector<std::string>{"max_chars", "max_digit_ratio", "max_words", "min_edit_distance"});
}

TEST_CASE("missing sidecar scores reject by that rule") {
  FilterConfig cfg;
  cfg.min_bicleaner = 0.5;
  SegmentPair p;
  p.source = "a clean source";
  p.target = "ein sauberes Ziel";
  const auto d = filter_pair(p, cfg);
  CHECK(d.rejected_by == std::vector<std::string>{"min_bicleaner"});
  CHECK(d.missing_scores == std::vector<std::string>{"min_bicleaner"});

  cfg.min_bicleaner.reset();
  cfg.lang_id = true;
  const std::map<std::string, double> half{{"lang_prob_src", 0.5}};
  const auto e = filter_pair(p, cfg, &half);
  CHECK(e.rejected_by == std::vector<std::string>{"min_lang_prob"});
  CHECK(e.missing_scores == std::vector<std::string>{"min_lang_prob"});
}

TEST_CASE("dedupe") {
  const Corpus c = make_corpus({"a", "a", "a", "b"}, {"x", "x", "y", "x"});
  const auto [out, removed] = dedupe(c);
  CHECK(removed == 1);
  REQUIRE(out.size() == 3);
  CHECK(out.pairs[1].target == "y");
  CHECK(dedupe(Corpus{}).second == 0);
}

TEST_CASE("pipeline is idempotent and reconciles") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Corpus c = random_corpus(rng, 60);
    const FilterConfig cfg;
    const auto first = run_filter_pipeline(c, cfg);
    CHECK(first.report.reconciles());
    const auto second = run_filter_pipeline(first.accepted, cfg);
    CHECK(second.report.accepted == first.accepted.size());
    CHECK(second.report.dedup_removed == 0);
    CHECK(second.accepted == first.accepted);
  }
}

TEST_CASE("loosening a threshold never shrinks the accepted set") {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 40; ++t) {
    const Corpus c = random_corpus(rng, 50);
    FilterConfig tight;
    tight.max_avg_word_len = 4 + rng() % 8;
    tight.max_chars = 40 + rng() % 150;
    tight.max_digit_ratio = (rng() % 20) / 100.0;
    tight.max_longest_word = 6 + rng() % 25;
    tight.max_words = 5 + rng() % 30;
    tight.min_edit_distance = rng() % 10;
    tight.min_chars = rng() % 30;
    const auto base = origin_ids(run_filter_pipeline(c, tight).accepted);
    for (int rule = 0; rule < 7; ++rule) {
      FilterConfig loose = tight;
      switch (rule) {
        case 0: loose.max_avg_word_len += 1 + rng() % 5; break;
        case 1: loose.max_chars += 1 + rng() % 100; break;
        case 2: loose.max_digit_ratio = std::min(1.0, loose.max_digit_ratio + 0.05); break;
        case 3: loose.max_longest_word += 1 + rng() % 10; break;
        case 4: loose.max_words += 1 + rng() % 10; break;
        case 5: loose.min_edit_distance -= std::min<std::size_t>(loose.min_edit_distance, 1 + rng() % 3); break;
        default: loose.min_chars -= std::min<std::size_t>(loose.min_chars, 1 + rng() % 5); break;
      }
      const auto wider = origin_ids(run_filter_pipeline(c, loose).accepted);
      CHECK(std::includes(wider.begin(), wider.end(), base.begin(), base.end()));
    }
  }
}

TEST_CASE("pipeline output does not depend on thread count") {
  std::mt19937_64 rng(3);
  const Corpus c = random_corpus(rng, 200);
  const auto one = run_filter_pipeline(c, FilterConfig{}, nullptr, 1);
  const auto four = run_filter_pipeline(c, FilterConfig{}, nullptr, 4);
  CHECK(one.accepted == four.accepted);
  CHECK(filter_report_json(one.report) == filter_report_json(four.report));
}

TEST_CASE("config validation") {
  FilterConfig cfg;
  cfg.max_digit_ratio = 1.5;
  CHECK(testing::code_of([&] { cfg.validate(); }) == ErrorCode::kParameter);
  cfg = FilterConfig{};
  cfg.max_avg_word_len = -1;
  CHECK(testing::code_of([&] { cfg.validate(); }) == ErrorCode::kParameter);
}

TEST_CASE("sidecar parse errors surface from the pipeline") {
  testing::TempDir dir;
  testing::write_file(dir / "side.tsv", "0\tbicleaner\t0.5\nbroken line\n");
  const Corpus c = make_corpus({"a b c d e"}, {"f g h i j"});
  CHECK(testing::code_of([&] {
          run_filter_pipeline(c, FilterConfig{}, std::optional<std::filesystem::path>(dir / "side.tsv"));
        }) == ErrorCode::kFormat);
}

TEST_CASE("report rendering") {
  ScoreSidecar sidecar;
  const Corpus corpus = one_violation_each(sidecar);
  const auto out = run_filter_pipeline(corpus, FilterConfig{}, &sidecar);
  const std::string json = filter_report_json(out.report);
  CHECK(json.find("\"per_rule_rejections\"") != std::string::npos);
  CHECK(format_filter_report(out.report).find("max_chars") != std::string::npos);
}
