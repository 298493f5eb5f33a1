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

#include "mbrkit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mbrkit/error.hpp"
#include "mbrkit/scorer.hpp"
#include "mbrkit/subprocess.hpp"
#include "mbrkit/utf8.hpp"

namespace fs = std::filesystem;

namespace mbrkit {

namespace {

using Json = nlohmann::ordered_json;

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string join_ids(const std::vector<std::size_t>& ids) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) out += (i ? ", " : "") + std::to_string(ids[i]);
  if (ids.size() > shown) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

std::string format_metric(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.4f", v);
  return buffer;
}

std::string tail(const std::string& text, std::size_t limit = 2000) {
  if (text.size() <= limit) return text;
  return "..." + text.substr(text.size() - limit);
}

std::string iteration_name(std::size_t k) { return "iter-" + std::to_string(k); }

}  // namespace

std::string state_to_json(const IterationState& state) {
  Json j;
  j["iteration"] = state.iteration;
  j["dataset_ref"] = state.dataset_ref;
  j["model_ref"] = state.model_ref;
  Json history = Json::object();
  for (const auto& [metric, values] : state.history) history[metric] = values;
  j["history"] = std::move(history);
  j["model_history"] = state.model_history;
  j["segment_history"] = state.segment_history;
  return j.dump(1) + "\n";
}

IterationState state_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    IterationState state;
    state.iteration = j.at("iteration").get<std::size_t>();
    state.dataset_ref = j.at("dataset_ref").get<std::string>();
    state.model_ref = j.at("model_ref").get<std::string>();
    state.history = j.at("history").get<std::map<std::string, std::vector<double>>>();
    state.model_history = j.at("model_history").get<std::vector<std::string>>();
    state.segment_history = j.at("segment_history").get<std::vector<std::size_t>>();
    const std::size_t expected = state.iteration + 1;
    bool consistent = state.model_history.size() == expected &&
                      state.segment_history.size() == expected;
    for (const auto& [metric, values] : state.history) consistent &= values.size() == expected;
    if (!consistent) fail(ErrorCode::kFormat, "state history lengths do not match iteration");
    return state;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("bad state file: ") + e.what());
  }
}

void save_state(const IterationState& state, const fs::path& path) {
  write_text_atomic(path, state_to_json(state));
}

IterationState load_state(const fs::path& path) { return state_from_json(read_text(path)); }

std::vector<std::string> LoopConfig::metrics() const {
  std::vector<std::string> all{selection_metric};
  all.insert(all.end(), monitored_metrics.begin(), monitored_metrics.end());
  return all;
}

void LoopConfig::validate() const {
  auto bad = [](const std::string& message) { fail(ErrorCode::kConfiguration, message); };
  if (max_iterations < 1) bad("max_iterations must be >= 1");
  if (top_k < 1) bad("top_k must be >= 1");
  if (candidates < 1) bad("candidates must be >= 1");
  if (selection_metric.empty()) bad("selection_metric is required");
  std::set<std::string> seen;
  for (const auto& m : monitored_metrics) {
    if (m == selection_metric) bad("selection metric '" + m + "' cannot also be monitored");
    if (!seen.insert(m).second) bad("monitored metric '" + m + "' listed twice");
  }
  if (translator_cmd.empty()) bad("translator_cmd is required");
  if (trainer_cmd.empty()) bad("trainer_cmd is required");
  if (train_src.empty()) bad("train_src is required");
  if (baseline_model.empty()) bad("baseline_model is required");
  for (const auto& m : metrics()) {
    if (!baseline_metrics.contains(m)) bad("missing baseline." + m);
  }
  for (const auto& [m, _] : baseline_metrics) {
    if (m != selection_metric && !seen.contains(m)) bad("baseline." + m + " names no configured metric");
  }
  if (utility != "chrf" && utility != "bleu" && utility != "edit" && utility != "external") {
    bad("unknown utility '" + utility + "' (expected chrf, bleu, edit or external)");
  }
  if (utility == "external" && scorer_cmd.empty()) bad("utility 'external' needs scorer_cmd");
}

LoopConfig parse_loop_config(const std::string& text, const fs::path& base_dir) {
  LoopConfig cfg;
  cfg.base_dir = base_dir;
  auto path_of = [&](const std::string& value) {
    const fs::path p(value);
    return p.is_absolute() ? p : base_dir / p;
  };
  std::set<std::string> keys;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_number);
    if (eq == std::string::npos) fail(ErrorCode::kConfiguration, where + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!keys.insert(key).second) fail(ErrorCode::kConfiguration, where + ": duplicate key " + key);

    auto count = [&]() -> std::size_t {
      std::size_t v = 0;
      const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || end != value.data() + value.size()) {
        fail(ErrorCode::kConfiguration, where + ": " + key + " must be a non-negative integer");
      }
      return v;
    };
    auto real = [&]() -> double {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size() || !std::isfinite(v)) {
        fail(ErrorCode::kConfiguration, where + ": " + key + " must be a number");
      }
      return v;
    };

    if (key == "max_iterations") cfg.max_iterations = count();
    else if (key == "utility") cfg.utility = value;
    else if (key == "scorer_cmd") cfg.scorer_cmd = value;
    else if (key == "selection_metric") cfg.selection_metric = value;
    else if (key == "monitored_metrics") {
      std::istringstream list(value);
      std::string item;
      while (std::getline(list, item, ',')) {
        item = trim(item);
        if (!item.empty()) cfg.monitored_metrics.push_back(item);
      }
    } else if (key == "top_k") cfg.top_k = count();
    else if (key == "candidates") cfg.candidates = count();
    else if (key == "include_self") {
      if (value != "true" && value != "false") {
        fail(ErrorCode::kConfiguration, where + ": include_self must be true or false");
      }
      cfg.include_self = value == "true";
    } else if (key == "trainer_cmd") cfg.trainer_cmd = value;
    else if (key == "translator_cmd") cfg.translator_cmd = value;
    else if (key == "train_src") cfg.train_src = path_of(value);
    else if (key == "valid_src") cfg.valid_src = path_of(value);
    else if (key == "valid_tgt") cfg.valid_tgt = path_of(value);
    else if (key == "work_dir") cfg.work_dir = path_of(value);
    else if (key == "baseline_model") cfg.baseline_model = value;
    else if (key == "threads") cfg.threads = count();
    else if (key.starts_with("baseline.") && key.size() > 9) cfg.baseline_metrics[key.substr(9)] = real();
    else fail(ErrorCode::kConfiguration, where + ": unknown key " + key);
  }
  if (!keys.contains("work_dir")) cfg.work_dir = base_dir / cfg.work_dir;
  cfg.validate();
  return cfg;
}

LoopConfig load_loop_config(const fs::path& path) {
  fs::path base = fs::absolute(path).parent_path();
  return parse_loop_config(read_text(path), base);
}

UtilityFn resolve_utility(const LoopConfig& cfg, std::unique_ptr<ScorerClient>& holder) {
  if (cfg.utility != "external") return parse_utility(cfg.utility);
  holder = ScorerClient::launch("cd " + shell_quote(cfg.base_dir.string()) + " && " +
                                cfg.scorer_cmd);
  return parse_utility("external", holder.get());
}

Corpus build_synthetic_dataset(const Corpus& corpus, const std::vector<CandidateSet>& sets,
                               const LoopConfig& cfg, const UtilityFn& utility) {
  std::map<std::size_t, const CandidateSet*> by_id;
  for (const auto& set : sets) by_id.emplace(set.segment_id, &set);
  std::vector<std::size_t> missing;
  std::set<std::size_t> corpus_ids;
  std::vector<CandidateSet> ordered;
  ordered.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    corpus_ids.insert(pair.id);
    auto it = by_id.find(pair.id);
    if (it == by_id.end()) {
      missing.push_back(pair.id);
    } else {
      ordered.push_back(*it->second);
    }
  }
  if (!missing.empty()) {
    fail(ErrorCode::kAlignment, "no candidates for segment ids " + join_ids(missing));
  }
  std::vector<std::size_t> unknown;
  for (const auto& [id, _] : by_id) {
    if (!corpus_ids.contains(id)) unknown.push_back(id);
  }
  if (!unknown.empty()) {
    fail(ErrorCode::kAlignment, "candidates for unknown segment ids " + join_ids(unknown));
  }
  DecodeOptions options;
  options.include_self = cfg.include_self;
  options.top_k = cfg.top_k;
  options.threads = cfg.threads;
  return synthetic_corpus(mbr_decode_corpus(ordered, &corpus, utility, options), corpus);
}

std::vector<Checkpoint> parse_checkpoints(const std::vector<std::string>& lines,
                                          const std::vector<std::string>& required) {
  std::vector<Checkpoint> checkpoints;
  std::map<std::string, std::size_t> index;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    const std::string where = "checkpoints.tsv line " + std::to_string(n + 1);
    std::vector<std::string> fields;
    std::istringstream row(lines[n]);
    std::string field;
    while (std::getline(row, field, '\t')) fields.push_back(field);
    if (fields.size() != 3) fail(ErrorCode::kContract, where + ": expected 3 tab-separated fields");
    double value = 0;
    std::size_t used = 0;
    try {
      value = std::stod(fields[2], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != fields[2].size() || !std::isfinite(value)) {
      fail(ErrorCode::kContract, where + ": bad metric value '" + fields[2] + "'");
    }
    auto [it, added] = index.emplace(fields[0], checkpoints.size());
    if (added) checkpoints.push_back({fields[0], {}});
    checkpoints[it->second].metrics[fields[1]] = value;
  }
  if (checkpoints.empty()) fail(ErrorCode::kContract, "trainer reported no checkpoints");
  for (const auto& ckpt : checkpoints) {
    for (const auto& metric : required) {
      if (!ckpt.metrics.contains(metric)) {
        fail(ErrorCode::kContract,
             "checkpoint " + ckpt.ref + " does not report metric '" + metric + "'");
      }
    }
  }
  return checkpoints;
}

std::size_t select_checkpoint(const std::vector<Checkpoint>& checkpoints,
                              const std::string& metric) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i].metrics.at(metric) > checkpoints[best].metrics.at(metric)) best = i;
  }
  return best;
}

namespace {

std::string hook_environment(const LoopConfig& cfg, std::size_t k) {
  std::string env = "MBRKIT_ITERATION=" + std::to_string(k);
  if (cfg.valid_src) env += " MBRKIT_VALID_SRC=" + shell_quote(cfg.valid_src->string());
  if (cfg.valid_tgt) env += " MBRKIT_VALID_TGT=" + shell_quote(cfg.valid_tgt->string());
  return "export " + env + "; ";
}

void run_hook(const std::string& name, const std::string& command, const LoopConfig& cfg) {
  const CommandResult result = run_command(command, cfg.base_dir);
  if (result.exit_code != 0) {
    fail(ErrorCode::kHook, name + " exited with status " + std::to_string(result.exit_code) +
                               "\n" + tail(result.output));
  }
}

Json checkpoint_json(const Checkpoint& ckpt) {
  Json metrics = Json::object();
  for (const auto& [m, v] : ckpt.metrics) metrics[m] = v;
  return Json{{"ref", ckpt.ref}, {"metrics", std::move(metrics)}};
}

IterationState advance(const IterationState& state, const LoopConfig& cfg, const Json& record) {
  const std::size_t k = state.iteration + 1;
  if (record.at("input_model").get<std::string>() != state.model_ref) {
    fail(ErrorCode::kConfiguration, iteration_name(k) + " was produced from model '" +
                                        record.at("input_model").get<std::string>() +
                                        "', not '" + state.model_ref + "'");
  }
  IterationState next = state;
  next.iteration = k;
  next.dataset_ref = record.at("dataset_ref").get<std::string>();
  next.model_ref = record.at("model_ref").get<std::string>();
  const auto& metrics = record.at("metrics");
  for (const auto& m : cfg.metrics()) {
    if (!metrics.contains(m)) {
      fail(ErrorCode::kContract, iteration_name(k) + " record lacks metric '" + m + "'");
    }
    next.history[m].push_back(metrics.at(m).get<double>());
  }
  next.model_history.push_back(next.model_ref);
  next.segment_history.push_back(record.at("segments").get<std::size_t>());
  return next;
}

}  // namespace

IterationState run_iteration(const IterationState& state, const LoopConfig& cfg,
                             const Corpus& corpus, const UtilityFn& utility) {
  const std::size_t k = state.iteration + 1;
  const std::string name = iteration_name(k);
  const fs::path dir = cfg.work_dir / name;
  const fs::path record_path = dir / "record.json";
  try {
    if (fs::exists(record_path)) {
      return advance(state, cfg, nlohmann::ordered_json::parse(read_text(record_path)));
    }
    fs::remove_all(dir);
    fs::create_directories(dir / "train");

    Json record;
    record["iteration"] = k;
    record["input_model"] = state.model_ref;
    record["dataset_ref"] = name + "/synthetic";
    record["segments"] = corpus.size();

    if (corpus.size() == 0) {
      write_parallel_corpus(corpus, dir / "synthetic.src", dir / "synthetic.tgt");
      Json metrics = Json::object();
      for (const auto& m : cfg.metrics()) metrics[m] = state.history.at(m).back();
      record["model_ref"] = state.model_ref;
      record["checkpoints"] = Json::array();
      record["metrics"] = std::move(metrics);
    } else {
      const fs::path candidates = fs::absolute(dir / "candidates.jsonl");
      run_hook("translator",
               hook_environment(cfg, k) + cfg.translator_cmd + " --model " +
                   shell_quote(state.model_ref) + " --input " +
                   shell_quote(fs::absolute(cfg.train_src).string()) + " --n " +
                   std::to_string(cfg.candidates) + " --out " + shell_quote(candidates.string()),
               cfg);
      if (!fs::exists(candidates)) {
        fail(ErrorCode::kContract, "translator wrote no " + candidates.string());
      }
      const Corpus synthetic =
          build_synthetic_dataset(corpus, load_candidate_sets(candidates), cfg, utility);
      const fs::path src = fs::absolute(dir / "synthetic.src");
      const fs::path tgt = fs::absolute(dir / "synthetic.tgt");
      write_parallel_corpus(synthetic, src, tgt);

      const fs::path out_dir = fs::absolute(dir / "train");
      run_hook("trainer",
               hook_environment(cfg, k) + cfg.trainer_cmd + " --train-src " +
                   shell_quote(src.string()) + " --train-tgt " + shell_quote(tgt.string()) +
                   " --init-model " + shell_quote(state.model_ref) + " --out-dir " +
                   shell_quote(out_dir.string()),
               cfg);
      if (!fs::exists(out_dir / "checkpoints.tsv")) {
        fail(ErrorCode::kContract, "trainer wrote no checkpoints.tsv");
      }
      const auto checkpoints = parse_checkpoints(read_lines(out_dir / "checkpoints.tsv"),
                                                 cfg.metrics());
      const std::size_t best = select_checkpoint(checkpoints, cfg.selection_metric);
      Json all = Json::array();
      for (const auto& ckpt : checkpoints) all.push_back(checkpoint_json(ckpt));
      Json metrics = Json::object();
      for (const auto& m : cfg.metrics()) metrics[m] = checkpoints[best].metrics.at(m);
      record["model_ref"] = checkpoints[best].ref;
      record["checkpoints"] = std::move(all);
      record["selected_checkpoint"] = best;
      record["metrics"] = std::move(metrics);
    }
    write_text_atomic(record_path, record.dump(1) + "\n");
    return advance(state, cfg, record);
  } catch (const Error& e) {
    throw Error(e.code(), "iteration " + std::to_string(k) + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "iteration " + std::to_string(k) + ": bad record: " + e.what());
  } catch (const fs::filesystem_error& e) {
    fail(ErrorCode::kIo, "iteration " + std::to_string(k) + ": " + e.what());
  }
}

StopDecision check_stopping(const IterationState& state, const LoopConfig& cfg) {
  StopDecision decision;
  decision.final_iteration = state.iteration;
  decision.final_model = state.model_ref;
  if (state.iteration == 0) return decision;
  for (const auto& metric : cfg.monitored_metrics) {
    const auto it = state.history.find(metric);
    if (it == state.history.end() || it->second.size() < 2) continue;
    const double previous = it->second[it->second.size() - 2];
    const double latest = it->second.back();
    if (latest < previous) {
      decision.stop = true;
      decision.reason = metric + " decreased from " + format_metric(previous) + " to " +
                        format_metric(latest) + " at iteration " +
                        std::to_string(state.iteration);
      decision.final_iteration = state.iteration - 1;
      decision.final_model = state.model_history.at(state.iteration - 1);
      return decision;
    }
  }
  if (state.iteration >= cfg.max_iterations) {
    decision.stop = true;
    decision.reason = "max_iterations";
  }
  return decision;
}

IterationState initial_state(const LoopConfig& cfg) {
  IterationState state;
  state.model_ref = cfg.baseline_model;
  for (const auto& m : cfg.metrics()) state.history[m] = {cfg.baseline_metrics.at(m)};
  state.model_history = {cfg.baseline_model};
  state.segment_history = {0};
  return state;
}

LoopResult run_loop(const LoopConfig& cfg, const Corpus& corpus, const UtilityFn& utility,
                    std::optional<std::size_t> max_steps) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.work_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + cfg.work_dir.string() + ": " + ec.message());
  const fs::path state_path = cfg.work_dir / "state.json";

  LoopResult result;
  if (fs::exists(state_path)) {
    result.state = load_state(state_path);
    if (result.state.model_history.front() != cfg.baseline_model) {
      fail(ErrorCode::kConfiguration, "work directory belongs to baseline '" +
                                          result.state.model_history.front() + "'");
    }
    for (const auto& m : cfg.metrics()) {
      if (!result.state.history.contains(m)) {
        fail(ErrorCode::kConfiguration, "work directory has no history for metric '" + m + "'");
      }
    }
  } else {
    result.state = initial_state(cfg);
    save_state(result.state, state_path);
  }

  std::size_t steps = 0;
  while (true) {
    if (result.state.iteration >= 1) {
      if (corpus.size() == 0) {
        result.decision.stop = true;
        result.decision.reason = "empty training corpus (0 segments)";
        result.decision.final_iteration = result.state.iteration;
        result.decision.final_model = result.state.model_ref;
      } else {
        result.decision = check_stopping(result.state, cfg);
      }
      if (result.decision.stop) {
        result.finished = true;
        break;
      }
    }
    if (max_steps && steps == *max_steps) break;
    result.state = run_iteration(result.state, cfg, corpus, utility);
    save_state(result.state, state_path);
    ++steps;
  }
  result.report = format_loop_report(result.state, cfg, result.decision);
  write_text_atomic(cfg.work_dir / "report.tsv", result.report);
  return result;
}

std::string format_loop_report(const IterationState& state, const LoopConfig& cfg,
                               const StopDecision& decision) {
  std::ostringstream out;
  const auto metrics = cfg.metrics();
  out << "iteration\tmodel\tsegments";
  for (const auto& m : metrics) out << '\t' << m;
  out << '\n';
  for (std::size_t k = 0; k <= state.iteration; ++k) {
    out << k << '\t' << state.model_history.at(k) << '\t';
    if (k == 0) {
      out << '-';
    } else {
      out << state.segment_history.at(k);
    }
    for (const auto& m : metrics) {
      const auto it = state.history.find(m);
      out << '\t' << (it == state.history.end() ? "NA" : format_metric(it->second.at(k)));
    }
    out << '\n';
  }
  if (decision.stop) {
    out << "# stopped: " << decision.reason << '\n'
        << "# final model: " << decision.final_model << " (iteration "
        << decision.final_iteration << ")\n";
  } else {
    out << "# interrupted after iteration " << state.iteration << '\n';
  }
  return out.str();
}

namespace {

double unit_real(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& engine, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t x = engine();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

constexpr std::u32string_view kNoiseAlphabet = U"abcdefghijklmnopqrstuvwxyz";

std::string perturb(const std::u32string& target, double rate, std::mt19937_64& engine) {
  std::u32string out;
  out.reserve(target.size() + 8);
  for (char32_t c : target) {
    if (unit_real(engine) >= rate) {
      out.push_back(c);
      continue;
    }
    const char32_t noise = kNoiseAlphabet[uniform_index(engine, kNoiseAlphabet.size())];
    switch (uniform_index(engine, 3)) {
      case 0: out.push_back(noise); break;
      case 1: break;
      default:
        out.push_back(noise);
        out.push_back(c);
        break;
    }
  }
  return utf8::encode(out);
}

}  // namespace

std::vector<CandidateSet> mock_translate(const Corpus& corpus, std::size_t n, double noise_rate,
                                         std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::kParameter, "n must be >= 1");
  if (!(noise_rate >= 0 && noise_rate <= 1)) {
    fail(ErrorCode::kParameter, "noise_rate must lie in [0, 1]");
  }
  std::vector<CandidateSet> sets;
  sets.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    if (!pair.target) {
      fail(ErrorCode::kIncompleteCorpus, "segment " + std::to_string(pair.id) + " has no target");
    }
    const std::u32string target = utf8::decode(*pair.target);
    CandidateSet set;
    set.segment_id = pair.id;
    for (std::size_t r = 0; r < n; ++r) {
      const double scale = n > 1 ? 1.0 + static_cast<double>(r) / static_cast<double>(n - 1) : 1.0;
      const double rate = std::min(1.0, noise_rate * scale);
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(pair.id),
                        static_cast<std::uint32_t>(pair.id >> 32), static_cast<std::uint32_t>(r)};
      std::mt19937_64 engine(seq);
      set.candidates.push_back(perturb(target, rate, engine));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace mbrkit
