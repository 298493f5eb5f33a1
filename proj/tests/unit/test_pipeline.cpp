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

#include <map>

#include "loop_fixture.hpp"
#include "mbrkit/metrics.hpp"
#include "mbrkit/scorer.hpp"

using namespace mbrkit;
using testing::LoopFixture;

namespace {

IterationState history_state(const std::vector<double>& chrf) {
  IterationState s;
  s.iteration = chrf.size() - 1;
  s.history["chrF"] = chrf;
  s.history["comet"] = std::vector<double>(chrf.size(), 0.5);
  for (std::size_t k = 0; k < chrf.size(); ++k) {
    s.model_history.push_back(k == 0 ? "base" : "m" + std::to_string(k));
    s.segment_history.push_back(k == 0 ? 0 : 10);
  }
  s.model_ref = s.model_history.back();
  return s;
}

LoopConfig stopping_config(std::size_t max_iterations) {
  LoopConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.selection_metric = "comet";
  cfg.monitored_metrics = {"chrF"};
  return cfg;
}

std::map<std::string, std::string> tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), root).string()] = testing::read_file(e.path());
    }
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const std::filesystem::path base = "/data/run";
  const std::string minimal =
      "selection_metric = comet\nmonitored_metrics = chrF, BLEU\n"
      "trainer_cmd = ./train --fast\ntranslator_cmd = ./translate\ntrain_src = corpus/train.src\n"
      "baseline_model = m0\nbaseline.comet = 0.8\nbaseline.chrF = 50\nbaseline.BLEU = 20.5\n";
  SUBCASE("values and defaults") {
    const LoopConfig cfg = parse_loop_config(minimal + "# comment\n\ntop_k = 8\n", base);
    CHECK(cfg.max_iterations == 3);
    CHECK(cfg.utility == "chrf");
    CHECK(cfg.top_k == 8);
    CHECK(cfg.include_self);
    CHECK(cfg.trainer_cmd == "./train --fast");
    CHECK(cfg.train_src == base / "corpus/train.src");
    CHECK(cfg.work_dir == base / "work");
    CHECK(cfg.metrics() == std::vector<std::string>{"comet", "chrF", "BLEU"});
    CHECK(cfg.baseline_metrics.at("BLEU") == 20.5);
  }
  SUBCASE("errors name the line") {
    auto msg = [&](const std::string& text) {
      return testing::message_of([&] { parse_loop_config(text, base); });
    };
    CHECK(msg(minimal + "colour = blue\n").find("line 10") != std::string::npos);
    CHECK(msg(minimal + "top_k = 8\ntop_k = 9\n").find("duplicate") != std::string::npos);
    CHECK(msg(minimal + "top_k = -1\n").find("top_k") != std::string::npos);
    CHECK(msg(minimal + "include_self = yes\n").find("include_self") != std::string::npos);
    CHECK(msg(minimal + "no equals sign\n").find("line 10") != std::string::npos);
    CHECK(testing::code_of([&] { parse_loop_config(minimal + "colour = blue\n", base); }) ==
          ErrorCode::kConfiguration);
  }
  SUBCASE("validation") {
    auto code = [&](const std::string& text) {
      return testing::code_of([&] { parse_loop_config(text, base); });
    };
    CHECK(code("selection_metric = comet\n") == ErrorCode::kConfiguration);
    std::string no_baseline = minimal;
    no_baseline.erase(no_baseline.find("baseline.BLEU"));
    CHECK(code(no_baseline) == ErrorCode::kConfiguration);
    CHECK(code(minimal + "utility = external\n") == ErrorCode::kConfiguration);
    CHECK(code(minimal + "utility = meteor\n") == ErrorCode::kConfiguration);
  }
}

TEST_CASE("state files round trip") {
  testing::TempDir dir;
  IterationState s = history_state({52.0, 52.7});
  s.dataset_ref = "iter-1/synthetic";
  save_state(s, dir / "state.json");
  CHECK(load_state(dir / "state.json") == s);
  CHECK_FALSE(std::filesystem::exists(dir / "state.json.tmp"));
  std::string text = state_to_json(s);
  text.replace(text.find("\"iteration\": 1"), 14, "\"iteration\": 2");
  CHECK(testing::code_of([&] { state_from_json(text); }) == ErrorCode::kFormat);
  CHECK(testing::code_of([] { state_from_json("{"); }) == ErrorCode::kFormat);
}

TEST_CASE("checkpoint parsing and selection") {
  const std::vector<std::string> lines{"a\tchrF\t50", "b\tchrF\t51", "a\tcomet\t0.9",
                                       "b\tcomet\t0.8", ""};
  const auto ckpts = parse_checkpoints(lines, {"comet", "chrF"});
  REQUIRE(ckpts.size() == 2);
  CHECK(ckpts[0].ref == "a");
  CHECK(select_checkpoint(ckpts, "comet") == 0);
  CHECK(select_checkpoint(ckpts, "chrF") == 1);
  CHECK(select_checkpoint(parse_checkpoints({"x\tm\t1", "y\tm\t1"}, {"m"}), "m") == 0);

  auto code = [](const std::vector<std::string>& l) {
    return testing::code_of([&] { parse_checkpoints(l, {"chrF"}); });
  };
  CHECK(code({}) == ErrorCode::kContract);
  CHECK(code({"a\tchrF"}) == ErrorCode::kContract);
  CHECK(code({"a\tchrF\tlots"}) == ErrorCode::kContract);
  CHECK(code({"a\tchrF\tnan"}) == ErrorCode::kContract);
  CHECK(code({"a\tcomet\t1"}) == ErrorCode::kContract);
  CHECK(testing::message_of([] { parse_checkpoints({"a\tcomet\t1"}, {"chrF"}); })
            .find("chrF") != std::string::npos);
}

TEST_CASE("stopping rule") {
  SUBCASE("decrease stops and keeps the previous model") {
    const auto d = check_stopping(history_state({52.0, 52.7, 52.8, 52.6}), stopping_config(10));
    CHECK(d.stop);
    CHECK(d.final_iteration == 2);
    CHECK(d.final_model == "m2");
    CHECK(d.reason == "chrF decreased from 52.8000 to 52.6000 at iteration 3");
  }
  SUBCASE("rise continues") {
    CHECK_FALSE(check_stopping(history_state({52.0, 52.7, 52.8}), stopping_config(10)).stop);
  }
  SUBCASE("equal is not a decrease") {
    CHECK_FALSE(check_stopping(history_state({52.0, 52.0}), stopping_config(10)).stop);
  }
  SUBCASE("decrease at iteration 1 falls back to the baseline") {
    const auto d = check_stopping(history_state({52.0, 51.9}), stopping_config(10));
    CHECK(d.stop);
    CHECK(d.final_model == "base");
    CHECK(d.final_iteration == 0);
  }
  SUBCASE("max_iterations keeps the current model") {
    const auto d = check_stopping(history_state({52.0, 52.7, 52.8}), stopping_config(2));
    CHECK(d.stop);
    CHECK(d.reason == "max_iterations");
    CHECK(d.final_model == "m2");
  }
  SUBCASE("only the latest step is compared") {
    CHECK_FALSE(check_stopping(history_state({52.0, 51.0, 51.5}), stopping_config(10)).stop);
  }
  SUBCASE("unmonitored metrics do not stop the loop") {
    auto s = history_state({52.0, 52.7});
    s.history["comet"] = {0.9, 0.1};
    CHECK_FALSE(check_stopping(s, stopping_config(10)).stop);
  }
  SUBCASE("baseline never stops") {
    CHECK_FALSE(check_stopping(history_state({52.0}), stopping_config(0)).stop);
  }
}

TEST_CASE("synthetic dataset construction") {
  const Corpus corpus = testing::mock_reference_corpus(30, 2);
  const auto sets = mock_translate(corpus, 6, 0.2, 1);
  LoopConfig cfg;
  cfg.top_k = 6;
  SUBCASE("one pair per segment with the MBR choice") {
    const Corpus synthetic = build_synthetic_dataset(corpus, sets, cfg, parse_utility("chrf"));
    REQUIRE(synthetic.size() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(synthetic.pairs[i].source == corpus.pairs[i].source);
      const auto r = mbr_select(sets[i].candidates, std::nullopt, parse_utility("chrf"));
      CHECK(*synthetic.pairs[i].target == r.selected_text);
    }
  }
  SUBCASE("coverage gaps are alignment errors") {
    auto gappy = sets;
    gappy.erase(gappy.begin() + 4);
    const std::string msg = testing::message_of(
        [&] { build_synthetic_dataset(corpus, gappy, cfg, parse_utility("chrf")); });
    CHECK(msg.find("alignment") == 0);
    CHECK(msg.find('4') != std::string::npos);
  }
  SUBCASE("unknown segments are alignment errors") {
    auto extra = sets;
    extra.push_back(sets[0]);
    extra.back().segment_id = 99;
    CHECK(testing::code_of([&] {
            build_synthetic_dataset(corpus, extra, cfg, parse_utility("chrf"));
          }) == ErrorCode::kAlignment);
  }
}

TEST_CASE("mock translator") {
  const Corpus corpus = testing::mock_reference_corpus(10, 5);
  const auto a = mock_translate(corpus, 50, 0.15, 9);
  CHECK(a.size() == 10);
  for (const auto& s : a) CHECK(s.candidates.size() == 50);
  const auto b = mock_translate(corpus, 50, 0.15, 9);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].candidates == b[i].candidates);
  CHECK(mock_translate(corpus, 50, 0.15, 10)[0].candidates != a[0].candidates);

  for (const auto& s : mock_translate(corpus, 3, 0.0, 9)) {
    for (const auto& c : s.candidates) CHECK(c == *corpus.pairs[s.segment_id].target);
  }
  double low = 0, high = 0;
  for (const auto& s : a) {
    const std::string& ref = *corpus.pairs[s.segment_id].target;
    for (std::size_t r = 0; r < 10; ++r) low += chrf_sentence(s.candidates[r], ref);
    for (std::size_t r = 40; r < 50; ++r) high += chrf_sentence(s.candidates[r], ref);
  }
  CHECK(low > high);

  CHECK(testing::code_of([&] { mock_translate(corpus, 0, 0.1, 1); }) == ErrorCode::kParameter);
  CHECK(testing::code_of([&] { mock_translate(corpus, 2, 1.5, 1); }) == ErrorCode::kParameter);
  const Corpus sources_only = make_corpus({"a", "b"}, {});
  CHECK(testing::code_of([&] { mock_translate(sources_only, 2, 0.1, 1); }) ==
        ErrorCode::kIncompleteCorpus);
}

TEST_CASE("loop runs until the monitored metric drops") {
  LoopFixture fx;
  const LoopConfig cfg = fx.config();
  const LoopResult r = run_loop(cfg, fx.corpus(), parse_utility("chrf"));
  CHECK(r.finished);
  CHECK(r.state.iteration == 3);
  CHECK(r.decision.final_model == "ckpt-2a");
  CHECK(r.decision.final_iteration == 2);
  CHECK(r.state.model_history == std::vector<std::string>{"base", "ckpt-1b", "ckpt-2a", "ckpt-3a"});
  CHECK(r.state.history.at("chrF") == std::vector<double>{52.0, 52.7, 52.8, 52.6});
  CHECK(testing::read_file(fx.dir / "trainer_calls.log") ==
        "1 base 20\n2 ckpt-1b 20\n3 ckpt-2a 20\n");
  CHECK(r.report ==
        "iteration\tmodel\tsegments\tcomet\tchrF\n"
        "0\tbase\t-\t0.8400\t52.0000\n"
        "1\tckpt-1b\t20\t0.8700\t52.7000\n"
        "2\tckpt-2a\t20\t0.8800\t52.8000\n"
        "3\tckpt-3a\t20\t0.8900\t52.6000\n"
        "# stopped: chrF decreased from 52.8000 to 52.6000 at iteration 3\n"
        "# final model: ckpt-2a (iteration 2)\n");
  CHECK(testing::read_file(fx.work() / "report.tsv") == r.report);
  for (int k = 1; k <= 3; ++k) {
    const auto dir = fx.work() / ("iter-" + std::to_string(k));
    CHECK(std::filesystem::exists(dir / "record.json"));
    CHECK(std::filesystem::exists(dir / "candidates.jsonl"));
    CHECK(load_parallel_corpus(dir / "synthetic.src", dir / "synthetic.tgt").size() == 20);
  }

  SUBCASE("a finished loop is not rerun") {
    const auto before = tree(fx.work());
    const LoopResult again = run_loop(cfg, fx.corpus(), parse_utility("chrf"));
    CHECK(again.state == r.state);
    CHECK(tree(fx.work()) == before);
    CHECK(testing::read_file(fx.dir / "trainer_calls.log").size() ==
          std::string("1 base 20\n2 ckpt-1b 20\n3 ckpt-2a 20\n").size());
  }
}

TEST_CASE("resumed loop equals an uninterrupted one") {
  LoopFixture straight, resumed;
  const LoopResult full = run_loop(straight.config(), straight.corpus(), parse_utility("chrf"));

  const LoopResult first = run_loop(resumed.config(), resumed.corpus(), parse_utility("chrf"), 1);
  CHECK_FALSE(first.finished);
  CHECK(first.state.iteration == 1);
  CHECK(first.report.find("# interrupted after iteration 1") != std::string::npos);
  const LoopResult second = run_loop(resumed.config(), resumed.corpus(), parse_utility("chrf"), 1);
  CHECK(second.state.iteration == 2);
  const LoopResult rest = run_loop(resumed.config(), resumed.corpus(), parse_utility("chrf"));

  CHECK(rest.state == full.state);
  CHECK(rest.report == full.report);
  CHECK(tree(resumed.work()) == tree(straight.work()));
}

TEST_CASE("a lost state file is rebuilt from completion records") {
  LoopFixture fx;
  const LoopConfig cfg = fx.config();
  run_loop(cfg, fx.corpus(), parse_utility("chrf"), 2);
  std::filesystem::remove(fx.work() / "state.json");
  std::filesystem::create_directories(fx.work() / "iter-3");
  testing::write_file(fx.work() / "iter-3" / "leftover", "partial");
  const LoopResult r = run_loop(cfg, fx.corpus(), parse_utility("chrf"));
  CHECK(r.state.iteration == 3);
  CHECK_FALSE(std::filesystem::exists(fx.work() / "iter-3" / "leftover"));
  CHECK(testing::read_file(fx.dir / "trainer_calls.log") ==
        "1 base 20\n2 ckpt-1b 20\n3 ckpt-2a 20\n");
}

TEST_CASE("resume refuses a different baseline") {
  LoopFixture fx;
  run_loop(fx.config(), fx.corpus(), parse_utility("chrf"), 1);
  LoopConfig other = fx.config();
  other.baseline_model = "other";
  CHECK(testing::code_of([&] { run_loop(other, fx.corpus(), parse_utility("chrf")); }) ==
        ErrorCode::kConfiguration);
}

TEST_CASE("max_iterations bounds the loop") {
  LoopFixture fx(20, testing::kDefaultPlan, "max_iterations = 1\n");
  const LoopResult r = run_loop(fx.config(), fx.corpus(), parse_utility("chrf"));
  CHECK(r.state.iteration == 1);
  CHECK(r.decision.reason == "max_iterations");
  CHECK(r.decision.final_model == "ckpt-1b");
}

TEST_CASE("empty training corpus") {
  LoopFixture fx(0);
  const LoopResult r = run_loop(fx.config(), fx.corpus(), parse_utility("chrf"));
  CHECK(r.finished);
  CHECK(r.state.iteration == 1);
  CHECK(r.state.model_ref == "base");
  CHECK(r.decision.reason == "empty training corpus (0 segments)");
  CHECK(r.state.history.at("chrF") == std::vector<double>{52.0, 52.0});
  CHECK_FALSE(std::filesystem::exists(fx.dir / "trainer_calls.log"));
}

TEST_CASE("hook and contract failures") {
  SUBCASE("trainer exit status") {
    LoopFixture fx(20, "1\tfail\n");
    const std::string msg = testing::message_of(
        [&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); });
    CHECK(msg.find("iteration 1") != std::string::npos);
    CHECK(msg.find("status 3") != std::string::npos);
    CHECK(msg.find("scripted failure") != std::string::npos);
    CHECK(testing::code_of([&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); }) ==
          ErrorCode::kHook);
    CHECK_FALSE(std::filesystem::exists(fx.work() / "iter-1" / "record.json"));
    CHECK(load_state(fx.work() / "state.json").iteration == 0);
  }
  SUBCASE("missing metric") {
    LoopFixture fx(20, "1\tckpt\tchrF\t53\n");
    const std::string msg = testing::message_of(
        [&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); });
    CHECK(msg.find("iteration 1: contract error") != std::string::npos);
    CHECK(msg.find("comet") != std::string::npos);
  }
  SUBCASE("malformed candidates") {
    const std::string broken = "sh " + (testing::data_dir() / "fixtures" / "broken_translator.sh").string();
    LoopFixture fx(20, testing::kDefaultPlan, "translator_cmd = " + broken + " garbage\n");
    const std::string msg = testing::message_of(
        [&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); });
    CHECK(msg.find("iteration 1") != std::string::npos);
    CHECK(testing::code_of([&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); }) ==
          ErrorCode::kFormat);
  }
  SUBCASE("candidates missing segments") {
    const std::string broken = "sh " + (testing::data_dir() / "fixtures" / "broken_translator.sh").string();
    LoopFixture fx(20, testing::kDefaultPlan, "translator_cmd = " + broken + " missing\n");
    CHECK(testing::code_of([&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); }) ==
          ErrorCode::kAlignment);
  }
  SUBCASE("translator that writes nothing") {
    LoopFixture fx(20, testing::kDefaultPlan, "translator_cmd = true\n");
    CHECK(testing::code_of([&] { run_loop(fx.config(), fx.corpus(), parse_utility("chrf")); }) ==
          ErrorCode::kContract);
  }
}

TEST_CASE("external utility reproduces the in-process loop") {
  LoopFixture internal, external(20, testing::kDefaultPlan,
                                 "utility = external\nscorer_cmd = " +
                                     std::string(MBRKIT_CLI_PATH) + " stub-scorer --max-batch 16\n");
  run_loop(internal.config(), internal.corpus(), parse_utility("chrf"));
  const LoopConfig cfg = external.config();
  std::unique_ptr<ScorerClient> client;
  const UtilityFn utility = resolve_utility(cfg, client);
  run_loop(cfg, external.corpus(), utility);
  for (int k = 1; k <= 3; ++k) {
    const std::string name = "iter-" + std::to_string(k) + "/synthetic.tgt";
    CHECK(testing::read_file(external.work() / name) == testing::read_file(internal.work() / name));
  }
}
