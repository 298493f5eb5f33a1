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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbrkit/error.hpp"
#include "mbrkit/filter.hpp"
#include "mbrkit/mbr.hpp"
#include "mbrkit/metrics.hpp"
#include "mbrkit/pipeline.hpp"
#include "mbrkit/scorer.hpp"
#include "mbrkit/significance.hpp"

namespace py = pybind11;
using namespace mbrkit;

namespace {

PyObject* error_type = nullptr;

std::vector<CandidateSet> to_sets(const std::vector<std::vector<std::string>>& lists) {
  std::vector<CandidateSet> sets;
  sets.reserve(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    CandidateSet set;
    set.segment_id = i;
    set.candidates = lists[i];
    sets.push_back(std::move(set));
  }
  return sets;
}

py::dict selection_dict(const MbrResult& r) {
  py::dict d;
  d["segment_id"] = r.segment_id;
  d["selected_index"] = r.selected_index;
  d["selected_text"] = r.selected_text;
  d["expected_utilities"] = r.expected_utilities;
  return d;
}

py::dict score_dict(const MetricScore& s) {
  py::dict d;
  d["score"] = s.corpus_value;
  d["signature"] = s.signature;
  d["sentences"] = s.sentence_values ? py::cast(*s.sentence_values) : py::none();
  return d;
}

py::dict significance_dict(const SignificanceResult& r) {
  py::dict d;
  d["metric"] = r.metric_name;
  d["delta"] = r.delta;
  d["p_value"] = r.p_value;
  d["trials"] = r.trials;
  d["alpha"] = r.alpha;
  d["significant"] = r.significant;
  d["seed"] = r.seed;
  d["generator"] = std::string(kBootstrapGenerator);
  return d;
}

FilterConfig filter_config(const py::dict& options) {
  FilterConfig cfg;
  for (const auto& [key, value] : options) {
    const std::string name = py::cast<std::string>(key);
    if (name == "max_avg_word_len") cfg.max_avg_word_len = py::cast<double>(value);
    else if (name == "max_chars") cfg.max_chars = py::cast<std::size_t>(value);
    else if (name == "max_digit_ratio") cfg.max_digit_ratio = py::cast<double>(value);
    else if (name == "max_longest_word") cfg.max_longest_word = py::cast<std::size_t>(value);
    else if (name == "max_words") cfg.max_words = py::cast<std::size_t>(value);
    else if (name == "min_edit_distance") cfg.min_edit_distance = py::cast<std::size_t>(value);
    else if (name == "min_chars") cfg.min_chars = py::cast<std::size_t>(value);
    else if (name == "min_lang_prob") cfg.min_lang_prob = py::cast<double>(value);
    else if (name == "lang_id") cfg.lang_id = py::cast<bool>(value);
    else if (name == "min_bicleaner") cfg.min_bicleaner = py::cast<std::optional<double>>(value);
    else throw py::key_error("unknown filter option '" + name + "'");
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_mbrkit, m) {
  m.doc() = "MBR reranking, corpus filtering and self-training tools.";

  error_type = PyErr_NewException("mbrkit.MbrkitError", PyExc_RuntimeError, nullptr);
  m.attr("MbrkitError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_steal<py::object>(
          PyObject_CallFunction(error_type, "s", e.what()));
      std::string code(to_string(e.code()));
      if (code.ends_with(" error")) code.resize(code.size() - 6);
      instance.attr("code") = code;
      PyErr_SetObject(error_type, instance.ptr());
    }
  });

  m.def("chrf_sentence", [](const std::string& hyp, const std::string& ref) {
    return chrf_sentence(hyp, ref);
  }, py::arg("hypothesis"), py::arg("reference"), "Sentence chrF (chrF2, 6 character orders).");
  m.def("bleu_sentence", [](const std::string& hyp, const std::string& ref) {
    return bleu_sentence(hyp, ref);
  }, py::arg("hypothesis"), py::arg("reference"), "Sentence BLEU with effective order.");
  m.def("chrf_corpus", [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
    return score_dict(chrf_corpus(hyps, refs));
  }, py::arg("hypotheses"), py::arg("references"));
  m.def("bleu_corpus", [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
    return score_dict(bleu_corpus(hyps, refs));
  }, py::arg("hypotheses"), py::arg("references"));

  m.def("mbr_select", [](const std::vector<std::string>& candidates, const std::string& utility,
                         bool include_self) {
    return selection_dict(mbr_select(candidates, std::nullopt, parse_utility(utility), include_self));
  }, py::arg("candidates"), py::arg("utility") = "chrf", py::arg("include_self") = true,
     "Pick the candidate with the highest expected utility against the others.");

  m.def("mbr_decode", [](const std::vector<std::vector<std::string>>& lists,
                         const std::string& utility, std::optional<std::size_t> top_k,
                         bool include_self, std::size_t threads) {
    const auto sets = to_sets(lists);
    DecodeOptions options;
    options.include_self = include_self;
    options.top_k = top_k;
    options.threads = threads;
    std::vector<MbrResult> results;
    {
      py::gil_scoped_release release;
      results = mbr_decode_corpus(sets, nullptr, parse_utility(utility), options);
    }
    py::list out;
    for (const auto& r : results) out.append(selection_dict(r));
    return out;
  }, py::arg("candidate_lists"), py::arg("utility") = "chrf", py::arg("top_k") = py::none(),
     py::arg("include_self") = true, py::arg("threads") = 1);

  m.def("sweep", [](const std::vector<std::vector<std::string>>& lists,
                    const std::vector<std::string>& references,
                    const std::vector<std::size_t>& counts, const std::string& utility) {
    const auto sets = to_sets(lists);
    std::vector<SweepRow> rows;
    {
      py::gil_scoped_release release;
      rows = sweep_candidate_counts(sets, nullptr, references, parse_utility(utility), counts);
    }
    py::list out;
    for (const auto& row : rows) {
      py::dict d;
      d["k"] = row.k;
      d["effective_k"] = row.effective_k;
      d["chrF"] = row.chrf;
      d["BLEU"] = row.bleu;
      d["mean_expected_utility"] = row.mean_expected_utility;
      out.append(d);
    }
    return out;
  }, py::arg("candidate_lists"), py::arg("references"),
     py::arg("counts") = kDefaultSweepCounts, py::arg("utility") = "chrf");

  m.def("filter_corpus", [](const std::vector<std::string>& sources,
                            const std::vector<std::string>& targets,
                            std::optional<ScoreSidecar> sidecar, const py::dict& options) {
    const FilterConfig cfg = filter_config(options);
    const FilterOutcome outcome =
        run_filter_pipeline(make_corpus(sources, targets), cfg, sidecar ? &*sidecar : nullptr);
    py::list src, tgt, origin;
    for (const auto& p : outcome.accepted.pairs) {
      src.append(p.source);
      tgt.append(*p.target);
      origin.append(std::stoul(p.meta.at("origin_id")));
    }
    py::dict report;
    report["total"] = outcome.report.total;
    report["accepted"] = outcome.report.accepted;
    report["rejected"] = outcome.report.rejected;
    report["dedup_removed"] = outcome.report.dedup_removed;
    report["per_rule_rejections"] = outcome.report.per_rule_rejections;
    py::dict d;
    d["sources"] = src;
    d["targets"] = tgt;
    d["origin_ids"] = origin;
    d["report"] = report;
    return d;
  }, py::arg("sources"), py::arg("targets"), py::arg("sidecar") = py::none(),
     py::arg("options") = py::dict(),
     "Deduplicate, then apply the filter rules; options override FilterConfig fields.");

  m.def("paired_bootstrap", [](const std::vector<double>& a, const std::vector<double>& b,
                               std::size_t trials, double alpha, std::uint64_t seed) {
    return significance_dict(paired_bootstrap(a, b, trials, alpha, seed));
  }, py::arg("scores_a"), py::arg("scores_b"), py::arg("trials") = 1000, py::arg("alpha") = 0.05,
     py::arg("seed") = 0);

  m.def("compare", [](const std::vector<std::string>& hyp_a, const std::vector<std::string>& hyp_b,
                      const std::vector<std::string>& references,
                      const std::vector<std::string>& metrics, std::size_t trials, double alpha,
                      std::uint64_t seed) {
    std::vector<MetricSpec> specs;
    for (const auto& name : metrics) specs.push_back(parse_metric(name));
    const auto a = evaluate_system("A", hyp_a, references, specs);
    const auto b = evaluate_system("B", hyp_b, references, specs);
    py::list out;
    for (const auto& r : compare_systems(a, b, trials, alpha, seed)) {
      py::dict d = significance_dict(r);
      d["value_a"] = a.per_metric.at(r.metric_name).corpus_value;
      d["value_b"] = b.per_metric.at(r.metric_name).corpus_value;
      out.append(d);
    }
    return out;
  }, py::arg("hypotheses_a"), py::arg("hypotheses_b"), py::arg("references"),
     py::arg("metrics") = std::vector<std::string>{"chrF", "BLEU"}, py::arg("trials") = 1000,
     py::arg("alpha") = 0.05, py::arg("seed") = 0);

  m.def("mock_translate", [](const std::vector<std::string>& targets, std::size_t n,
                             double noise_rate, std::uint64_t seed) {
    std::vector<std::vector<std::string>> out;
    for (auto& set : mock_translate(make_corpus(targets, targets), n, noise_rate, seed)) {
      out.push_back(std::move(set.candidates));
    }
    return out;
  }, py::arg("targets"), py::arg("n") = 50, py::arg("noise_rate") = 0.15, py::arg("seed") = 0);

  m.def("run_loop", [](const std::filesystem::path& config, std::optional<std::size_t> max_steps) {
    LoopResult result;
    {
      py::gil_scoped_release release;
      const LoopConfig cfg = load_loop_config(config);
      std::unique_ptr<ScorerClient> client;
      const UtilityFn utility = resolve_utility(cfg, client);
      result = run_loop(cfg, load_parallel_corpus(cfg.train_src), utility, max_steps);
    }
    py::dict d;
    d["iteration"] = result.state.iteration;
    d["finished"] = result.finished;
    d["model"] = result.state.model_ref;
    d["final_model"] = result.decision.stop ? py::cast(result.decision.final_model) : py::none();
    d["reason"] = result.decision.reason;
    d["history"] = result.state.history;
    d["report"] = result.report;
    return d;
  }, py::arg("config"), py::arg("max_steps") = py::none(),
     "Run or resume the self-training loop described by a config file.");

#ifdef MBRKIT_VERSION
  m.attr("__version__") = MBRKIT_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
