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

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbrkit/corpus.hpp"
#include "mbrkit/error.hpp"
#include "mbrkit/filter.hpp"
#include "mbrkit/mbr.hpp"
#include "mbrkit/pipeline.hpp"
#include "mbrkit/scorer.hpp"
#include "mbrkit/significance.hpp"

namespace fs = std::filesystem;
using namespace mbrkit;

namespace {

constexpr const char* kScorerEnv = "MBR_SCORER_CMD";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out.flush()) fail(ErrorCode::kIo, "cannot write " + path.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> counts;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      fail(ErrorCode::kParameter, "--counts: '" + item + "' is not a count");
    }
    counts.push_back(static_cast<std::size_t>(v));
  }
  return counts;
}

struct ScorerFlags {
  std::string command;
  double timeout_s = 120;

  void add(CLI::App* cmd) {
    cmd->add_option("--scorer-cmd", command,
                    std::string("Scorer endpoint command (default: $") + kScorerEnv + ")");
    cmd->add_option("--batch-timeout", timeout_s, "Seconds to wait for each scorer batch")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  std::optional<std::string> resolved() const {
    if (!command.empty()) return command;
    if (const char* env = std::getenv(kScorerEnv); env != nullptr && *env != '\0') {
      return std::string(env);
    }
    return std::nullopt;
  }

  std::unique_ptr<ScorerClient> launch() const {
    const auto cmd = resolved();
    if (!cmd) return nullptr;
    ClientOptions options;
    options.batch_timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));
    options.handshake_timeout = options.batch_timeout;
    auto client = ScorerClient::launch(*cmd, options);
    const Capability& cap = client->handshake();
    std::cerr << "scorer: " << cap.name << " " << cap.version << " (max_batch " << cap.max_batch
              << ")\n";
    return client;
  }
};

// Without --utility, an available scorer endpoint wins over chrF.
UtilityFn pick_utility(const std::string& name, const ScorerFlags& scorer,
                       std::unique_ptr<ScorerClient>& holder) {
  const std::string chosen = !name.empty() ? name : (scorer.resolved() ? "external" : "chrf");
  if (chosen == "external") {
    holder = scorer.launch();
    if (!holder) {
      fail(ErrorCode::kConfiguration,
           std::string("utility 'external' needs --scorer-cmd or $") + kScorerEnv);
    }
  }
  return parse_utility(chosen, holder.get());
}

std::optional<Corpus> maybe_sources(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_parallel_corpus(path);
}

std::vector<MetricSpec> pick_metrics(const std::string& list, const std::string& external_name,
                                     const ScorerFlags& scorer,
                                     std::unique_ptr<ScorerClient>& holder) {
  std::vector<MetricSpec> metrics;
  for (const auto& name : split_list(list)) {
    if (name == "external") {
      if (!holder) holder = scorer.launch();
      if (!holder) {
        fail(ErrorCode::kConfiguration,
             std::string("metric 'external' needs --scorer-cmd or $") + kScorerEnv);
      }
      metrics.push_back(MetricSpec::external(external_name, *holder));
    } else {
      metrics.push_back(parse_metric(name));
    }
  }
  if (metrics.empty()) fail(ErrorCode::kConfiguration, "--metrics is empty");
  return metrics;
}

std::string system_name(const std::string& path) { return fs::path(path).filename().string(); }

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"MBR reranking, corpus filtering and self-training toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  std::size_t threads = 0;
  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  };

  // filter
  auto* filter = app.add_subcommand("filter", "Deduplicate and filter a parallel corpus");
  std::string f_src, f_tgt, f_sidecar, f_out_src, f_out_tgt, f_report;
  FilterConfig f_cfg;
  double f_bicleaner = -1;
  filter->add_option("--src", f_src, "Source side")->required()->check(CLI::ExistingFile);
  filter->add_option("--tgt", f_tgt, "Target side")->required()->check(CLI::ExistingFile);
  filter->add_option("--sidecar", f_sidecar, "Score sidecar (segment_id, name, value TSV)")
      ->check(CLI::ExistingFile);
  filter->add_option("--out-src", f_out_src, "Accepted source lines")->required();
  filter->add_option("--out-tgt", f_out_tgt, "Accepted target lines")->required();
  filter->add_option("--report", f_report, "Write the JSON report here");
  filter->add_option("--max-avg-word-len", f_cfg.max_avg_word_len)->capture_default_str();
  filter->add_option("--max-chars", f_cfg.max_chars)->capture_default_str();
  filter->add_option("--max-digit-ratio", f_cfg.max_digit_ratio)->capture_default_str();
  filter->add_option("--max-longest-word", f_cfg.max_longest_word)->capture_default_str();
  filter->add_option("--max-words", f_cfg.max_words)->capture_default_str();
  filter->add_option("--min-edit-distance", f_cfg.min_edit_distance)->capture_default_str();
  filter->add_option("--min-chars", f_cfg.min_chars)->capture_default_str();
  filter->add_option("--min-lang-prob", f_cfg.min_lang_prob)->capture_default_str();
  filter->add_flag("--lang-id", f_cfg.lang_id, "Require language-ID scores for every pair");
  filter->add_option("--min-bicleaner", f_bicleaner, "Enable the Bicleaner rule (e.g. 0.5)");
  add_threads(filter);

  // mbr
  auto* mbr = app.add_subcommand("mbr", "Select one candidate per segment by MBR");
  std::string m_candidates, m_source, m_utility, m_out, m_scores;
  std::size_t m_top_k = 50;
  bool m_exclude_self = false;
  ScorerFlags m_scorer;
  mbr->add_option("--candidates", m_candidates, "Candidate JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  mbr->add_option("--source", m_source, "Source sentences, one per segment id")
      ->check(CLI::ExistingFile);
  mbr->add_option("--utility", m_utility, "chrf, bleu, edit or external (default: chrf, or "
                                          "external when a scorer command is set)");
  mbr->add_option("--top-k", m_top_k, "Use the first k candidates")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  mbr->add_flag("--exclude-self", m_exclude_self, "Leave u(h, h) out of the expectation");
  mbr->add_option("--out", m_out, "Selected hypotheses, one line per segment")->required();
  mbr->add_option("--scores", m_scores, "Per-segment selection details (JSONL)");
  m_scorer.add(mbr);
  add_threads(mbr);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Score MBR output over candidate-count prefixes");
  std::string s_candidates, s_source, s_ref, s_utility, s_counts, s_out;
  bool s_timing = false, s_exclude_self = false;
  ScorerFlags s_scorer;
  sweep->add_option("--candidates", s_candidates, "Candidate JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--ref", s_ref, "References, one per segment")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--source", s_source, "Source sentences")->check(CLI::ExistingFile);
  sweep->add_option("--utility", s_utility, "chrf, bleu, edit or external");
  sweep->add_option("--counts", s_counts, "Comma-separated candidate counts")
      ->default_str("10,25,50,100,200,300,400,500");
  sweep->add_flag("--exclude-self", s_exclude_self, "Leave u(h, h) out of the expectation");
  sweep->add_flag("--timing", s_timing, "Include wall-clock times (not reproducible)");
  sweep->add_option("--out", s_out, "Write the table here instead of standard output");
  s_scorer.add(sweep);
  add_threads(sweep);

  // eval
  auto* eval = app.add_subcommand("eval", "Score a system against references");
  std::string e_hyp, e_ref, e_source, e_metrics = "chrF,BLEU", e_json, e_external = "external";
  ScorerFlags e_scorer;
  eval->add_option("--hyp", e_hyp, "Hypotheses")->required()->check(CLI::ExistingFile);
  eval->add_option("--ref", e_ref, "References")->required()->check(CLI::ExistingFile);
  eval->add_option("--source", e_source, "Sources (for external metrics)")
      ->check(CLI::ExistingFile);
  eval->add_option("--metrics", e_metrics, "Comma-separated: chrF, BLEU, external")
      ->capture_default_str();
  eval->add_option("--external-name", e_external, "Report name of the external metric")
      ->capture_default_str();
  eval->add_option("--json", e_json, "Write per-sentence scores as JSON");
  e_scorer.add(eval);

  // compare
  auto* compare = app.add_subcommand("compare", "Paired bootstrap test of systems against A");
  std::string c_hyp_a, c_ref, c_source, c_metrics = "chrF,BLEU", c_json, c_external = "external";
  std::vector<std::string> c_hyp_b;
  std::size_t c_trials = 1000;
  double c_alpha = 0.05;
  std::uint64_t c_seed = 0;
  ScorerFlags c_scorer;
  compare->add_option("--hyp-a", c_hyp_a, "Baseline hypotheses")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--hyp-b", c_hyp_b, "Compared hypotheses (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  compare->add_option("--ref", c_ref, "References")->required()->check(CLI::ExistingFile);
  compare->add_option("--source", c_source, "Sources (for external metrics)")
      ->check(CLI::ExistingFile);
  compare->add_option("--metrics", c_metrics, "Comma-separated: chrF, BLEU, external")
      ->capture_default_str();
  compare->add_option("--external-name", c_external, "Report name of the external metric")
      ->capture_default_str();
  compare->add_option("--trials", c_trials, "Bootstrap resamples")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  compare->add_option("--alpha", c_alpha, "Significance level")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  compare->add_option("--seed", c_seed, "Resampling seed")->capture_default_str();
  compare->add_option("--json", c_json, "Write comparison records as JSON");
  c_scorer.add(compare);

  // loop
  auto* loop = app.add_subcommand("loop", "Run or resume the iterative self-training loop");
  std::string l_config;
  std::size_t l_max_steps = 0;
  loop->add_option("--config", l_config, "Loop config file (key = value)")
      ->required()
      ->check(CLI::ExistingFile);
  loop->add_option("--max-steps", l_max_steps, "Stop after this many iterations in this call");
  add_threads(loop);

  // mock-translate
  auto* mock = app.add_subcommand("mock-translate", "Generate noisy candidate lists from targets");
  std::string t_target, t_input, t_model, t_out;
  std::size_t t_n = 50;
  double t_noise = 0.15;
  std::uint64_t t_seed = 0;
  mock->add_option("--target", t_target, "Target sentences perturbed into candidates")
      ->required()
      ->check(CLI::ExistingFile);
  mock->add_option("--input", t_input, "Source sentences; must align with --target")
      ->check(CLI::ExistingFile);
  mock->add_option("--model", t_model, "Model name, mixed into the seed");
  mock->add_option("--n", t_n, "Candidates per segment")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  mock->add_option("--noise-rate", t_noise, "Per-character edit rate of rank 0")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  mock->add_option("--seed", t_seed, "Random seed")->capture_default_str();
  mock->add_option("--out", t_out, "Candidate JSONL file")->required();

  // stub-scorer
  auto* stub = app.add_subcommand("stub-scorer", "Serve the deterministic stub scorer on stdio");
  std::string st_mode = "overlap";
  StubConfig st_cfg;
  std::size_t st_crash = 0;
  stub->add_option("--mode", st_mode, "overlap, constant or length-penalty")
      ->capture_default_str();
  stub->add_option("--constant", st_cfg.constant, "Score in constant mode")->capture_default_str();
  stub->add_option("--max-batch", st_cfg.max_batch, "Advertised batch limit")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  stub->add_flag("--needs-src", st_cfg.needs_src, "Advertise needs_src");
  stub->add_flag("--out-of-order", st_cfg.out_of_order, "Answer each batch in reverse order");
  auto* crash_opt =
      stub->add_option("--crash-after", st_crash, "Die after this many responses");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (filter->parsed()) {
    if (f_bicleaner >= 0) f_cfg.min_bicleaner = f_bicleaner;
    const Corpus corpus = load_parallel_corpus(f_src, fs::path(f_tgt));
    std::optional<fs::path> sidecar;
    if (!f_sidecar.empty()) sidecar = f_sidecar;
    const FilterOutcome outcome = run_filter_pipeline(corpus, f_cfg, sidecar, threads);
    write_parallel_corpus(outcome.accepted, f_out_src, f_out_tgt);
    if (!f_report.empty()) write_text(f_report, filter_report_json(outcome.report) + "\n");
    std::cout << format_filter_report(outcome.report);
    return 0;
  }

  if (mbr->parsed()) {
    std::unique_ptr<ScorerClient> client;
    const UtilityFn utility = pick_utility(m_utility, m_scorer, client);
    const auto sets = load_candidate_sets(m_candidates);
    const auto sources = maybe_sources(m_source);
    DecodeOptions options;
    options.include_self = !m_exclude_self;
    options.top_k = m_top_k;
    options.threads = threads;
    std::cerr << "mbr: " << sets.size() << " segments, utility " << utility.name() << "\n";
    const auto results = mbr_decode_corpus(sets, sources ? &*sources : nullptr, utility, options);
    std::vector<std::string> lines;
    std::vector<std::string> details;
    for (const auto& r : results) {
      lines.push_back(r.selected_text);
      nlohmann::ordered_json j;
      j["segment_id"] = r.segment_id;
      j["selected_index"] = r.selected_index;
      j["expected_utility"] = r.expected_utilities[r.selected_index];
      details.push_back(j.dump());
    }
    write_lines(m_out, lines);
    if (!m_scores.empty()) write_lines(m_scores, details);
    return 0;
  }

  if (sweep->parsed()) {
    std::unique_ptr<ScorerClient> client;
    const UtilityFn utility = pick_utility(s_utility, s_scorer, client);
    const auto sets = load_candidate_sets(s_candidates);
    const auto sources = maybe_sources(s_source);
    const auto references = read_lines(s_ref);
    DecodeOptions options;
    options.include_self = !s_exclude_self;
    options.threads = threads;
    const auto counts = s_counts.empty() ? kDefaultSweepCounts : parse_counts(s_counts);
    const auto rows = sweep_candidate_counts(sets, sources ? &*sources : nullptr, references,
                                             utility, counts, options);
    const std::string table = format_sweep_table(rows, s_timing);
    if (s_out.empty()) {
      std::cout << table;
    } else {
      write_text(s_out, table);
    }
    return 0;
  }

  if (eval->parsed()) {
    std::unique_ptr<ScorerClient> client;
    const auto metrics = pick_metrics(e_metrics, e_external, e_scorer, client);
    const auto hyps = read_lines(e_hyp);
    const auto refs = read_lines(e_ref);
    std::optional<std::vector<std::string>> sources;
    if (!e_source.empty()) sources = read_lines(e_source);
    const auto evaluation =
        evaluate_system(system_name(e_hyp), hyps, refs, metrics, sources ? &*sources : nullptr);
    std::cout << render_table({evaluation}, {});
    for (const auto& [name, score] : evaluation.per_metric) {
      std::cout << name << " signature: " << score.signature << "\n";
    }
    if (!e_json.empty()) write_text(e_json, evaluation_json(evaluation) + "\n");
    return 0;
  }

  if (compare->parsed()) {
    std::unique_ptr<ScorerClient> client;
    const auto metrics = pick_metrics(c_metrics, c_external, c_scorer, client);
    const auto refs = read_lines(c_ref);
    std::optional<std::vector<std::string>> sources;
    if (!c_source.empty()) sources = read_lines(c_source);
    const auto* src = sources ? &*sources : nullptr;
    std::vector<SystemEvaluation> systems;
    systems.push_back(evaluate_system(system_name(c_hyp_a), read_lines(c_hyp_a), refs, metrics, src));
    for (const auto& path : c_hyp_b) {
      systems.push_back(evaluate_system(system_name(path), read_lines(path), refs, metrics, src));
    }
    std::vector<std::vector<SignificanceResult>> versus(systems.size());
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (std::size_t s = 1; s < systems.size(); ++s) {
      versus[s] = compare_systems(systems[0], systems[s], c_trials, c_alpha, c_seed);
      for (auto& record : nlohmann::ordered_json::parse(
               comparison_json(systems[0], systems[s], versus[s]))) {
        records.push_back(std::move(record));
      }
    }
    std::cout << render_table(systems, versus);
    for (std::size_t s = 1; s < systems.size(); ++s) {
      for (const auto& r : versus[s]) {
        char line[256];
        std::snprintf(line, sizeof line, "%s vs %s  %-8s delta %+.4f  p = %.4f%s\n",
                      systems[s].system_name.c_str(), systems[0].system_name.c_str(),
                      r.metric_name.c_str(), r.delta, r.p_value, r.significant ? "  *" : "");
        std::cout << line;
      }
    }
    std::cout << "paired bootstrap: " << c_trials << " trials, alpha " << c_alpha << ", seed "
              << c_seed << " (" << kBootstrapGenerator << ")\n";
    if (!c_json.empty()) write_text(c_json, records.dump(1) + "\n");
    return 0;
  }

  if (loop->parsed()) {
    LoopConfig cfg = load_loop_config(l_config);
    if (threads != 0 || cfg.threads == 0) cfg.threads = threads;
    std::unique_ptr<ScorerClient> client;
    const UtilityFn utility = resolve_utility(cfg, client);
    const Corpus corpus = load_parallel_corpus(cfg.train_src);
    std::optional<std::size_t> steps;
    if (l_max_steps > 0) steps = l_max_steps;
    const LoopResult result = run_loop(cfg, corpus, utility, steps);
    std::cout << result.report;
    return 0;
  }

  if (mock->parsed()) {
    std::vector<std::string> targets = read_lines(t_target);
    std::vector<std::string> sources = targets;
    if (!t_input.empty()) {
      sources = read_lines(t_input);
      if (sources.size() != targets.size()) {
        fail(ErrorCode::kAlignment, std::to_string(sources.size()) + " input lines but " +
                                        std::to_string(targets.size()) + " target lines");
      }
    }
    std::uint64_t seed = t_seed;
    if (!t_model.empty()) {
      std::uint64_t hash = 1469598103934665603ULL;
      for (unsigned char c : t_model) hash = (hash ^ c) * 1099511628211ULL;
      seed ^= hash;
    }
    const Corpus corpus = make_corpus(sources, targets);
    write_candidate_sets(mock_translate(corpus, t_n, t_noise, seed), t_out);
    return 0;
  }

  if (stub->parsed()) {
    st_cfg.mode = parse_stub_mode(st_mode);
    if (crash_opt->count() > 0) st_cfg.crash_after = st_crash;
    std::ios::sync_with_stdio(false);
    const int code = serve_stub(st_cfg, std::cin, std::cout);
    if (code == 137) std::raise(SIGKILL);
    return code;
  }
  return 1;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "mbrkit: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mbrkit: i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mbrkit: " << e.what() << "\n";
    return 2;
  }
}
