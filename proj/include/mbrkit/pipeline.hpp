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
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbrkit/corpus.hpp"
#include "mbrkit/mbr.hpp"

namespace mbrkit {

class ScorerClient;

/// Loop progress. Entry 0 of every history list is the baseline, so each list
/// holds iteration + 1 values.
struct IterationState {
  std::size_t iteration = 0;
  std::string dataset_ref;  // relative to the work directory; empty at baseline
  std::string model_ref;
  std::map<std::string, std::vector<double>> history;
  std::vector<std::string> model_history;
  std::vector<std::size_t> segment_history;

  bool operator==(const IterationState&) const = default;
};

std::string state_to_json(const IterationState& state);
IterationState state_from_json(const std::string& text);
/// Writes through a temporary file and a rename.
void save_state(const IterationState& state, const std::filesystem::path& path);
IterationState load_state(const std::filesystem::path& path);

struct LoopConfig {
  std::size_t max_iterations = 3;
  std::string utility = "chrf";
  /// Endpoint command for utility = external.
  std::string scorer_cmd;
  std::string selection_metric;
  std::vector<std::string> monitored_metrics;
  std::size_t top_k = 50;
  /// Candidates requested from the translator per segment.
  std::size_t candidates = 50;
  bool include_self = true;
  std::string trainer_cmd;
  std::string translator_cmd;
  std::filesystem::path train_src;
  std::optional<std::filesystem::path> valid_src;
  std::optional<std::filesystem::path> valid_tgt;
  std::filesystem::path work_dir = "work";
  std::string baseline_model;
  std::map<std::string, double> baseline_metrics;
  /// Hooks run here; relative paths above were resolved against it.
  std::filesystem::path base_dir = ".";
  std::size_t threads = 1;

  /// Every metric the trainer must report: selection first, then monitored.
  std::vector<std::string> metrics() const;
  void validate() const;
};

/// Flat `key = value` lines; lines starting with `#` are comments. Metric baselines are given
/// as `baseline.<metric> = value`. Paths are relative to the file's directory.
LoopConfig parse_loop_config(const std::string& text, const std::filesystem::path& base_dir);
LoopConfig load_loop_config(const std::filesystem::path& path);

/// Utility named by the config; external utilities launch `scorer_cmd` into
/// `holder`.
UtilityFn resolve_utility(const LoopConfig& cfg, std::unique_ptr<ScorerClient>& holder);

/// MBR over the first top_k candidates of each set, one output pair per
/// corpus segment in corpus order.
Corpus build_synthetic_dataset(const Corpus& corpus, const std::vector<CandidateSet>& sets,
                               const LoopConfig& cfg, const UtilityFn& utility);

struct Checkpoint {
  std::string ref;
  std::map<std::string, double> metrics;
};

/// Parses `checkpoint_ref<TAB>metric<TAB>value` lines, checkpoints in order of
/// first appearance; every checkpoint must report every name in `required`.
std::vector<Checkpoint> parse_checkpoints(const std::vector<std::string>& lines,
                                          const std::vector<std::string>& required);

/// First checkpoint with the highest `metric`.
std::size_t select_checkpoint(const std::vector<Checkpoint>& checkpoints,
                              const std::string& metric);

/// Runs one translate / MBR / train round into work_dir/iter-<k>. A directory
/// that already holds a completion record is reused instead of rerun.
IterationState run_iteration(const IterationState& state, const LoopConfig& cfg,
                             const Corpus& corpus, const UtilityFn& utility);

struct StopDecision {
  bool stop = false;
  std::string reason;
  std::size_t final_iteration = 0;
  std::string final_model;
};

StopDecision check_stopping(const IterationState& state, const LoopConfig& cfg);

struct LoopResult {
  IterationState state;
  StopDecision decision;
  /// False when max_steps ran out before the loop stopped.
  bool finished = false;
  std::string report;
};

IterationState initial_state(const LoopConfig& cfg);

/// Resumes from work_dir/state.json when present. `max_steps` bounds the
/// number of iterations run by this call.
LoopResult run_loop(const LoopConfig& cfg, const Corpus& corpus, const UtilityFn& utility,
                    std::optional<std::size_t> max_steps = std::nullopt);

/// One row per iteration with every metric, then the stopping line.
std::string format_loop_report(const IterationState& state, const LoopConfig& cfg,
                               const StopDecision& decision);

/// Desk-scale candidate generator: rank r of each segment is the target with
/// seeded character edits at rate noise_rate * (1 + r / (n - 1)).
std::vector<CandidateSet> mock_translate(const Corpus& corpus, std::size_t n, double noise_rate,
                                         std::uint64_t seed);

}  // namespace mbrkit
