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

#include <chrono>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbrkit/subprocess.hpp"

namespace mbrkit {

// Wire protocol: UTF-8 JSON objects, one per line.
//   endpoint -> client, once:  {"hello": {"name", "version", "needs_src",
//                                         "needs_ref", "max_batch", "out_of_order"}}
//   client -> endpoint:        {"id": 1, "src": "...", "mt": "...", "ref": "..."}
//   endpoint -> client:        {"id": 1, "score": 0.5}
// The client ends the session by closing the endpoint's stdin.

struct ScoreRequest {
  std::int64_t id = 0;
  std::optional<std::string> src;
  std::string mt;
  std::optional<std::string> ref;
};

struct ScoreResponse {
  std::int64_t id = 0;
  double score = 0.0;

  bool operator==(const ScoreResponse&) const = default;
};

struct Capability {
  std::string name;
  std::string version;
  bool needs_src = false;
  bool needs_ref = true;
  std::size_t max_batch = 64;
  bool out_of_order = false;
};

std::string encode_hello(const Capability& capability);
/// Throws a startup error quoting `line` if it is not a hello record.
Capability decode_hello(std::string_view line);
std::string encode_request(const ScoreRequest& request);
ScoreRequest decode_request(std::string_view line);
std::string encode_response(const ScoreResponse& response);
ScoreResponse decode_response(std::string_view line);

/// Bidirectional line transport to an endpoint.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(std::string_view line) = 0;
  /// nullopt signals that the endpoint closed its output.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

/// Endpoint running as a child process (`/bin/sh -c command`).
class ProcessChannel : public LineChannel {
 public:
  explicit ProcessChannel(const std::string& command) : child_(command) {}

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  void close() override;

  ChildProcess& process() { return child_; }

 private:
  ChildProcess child_;
};

// ---------------------------------------------------------------------------
// Deterministic stub endpoint

enum class StubMode { kConstant, kOverlap, kLengthPenalty };

struct StubConfig {
  StubMode mode = StubMode::kOverlap;
  double constant = 0.5;
  std::size_t max_batch = 64;
  bool needs_src = false;
  /// Reply to each batch in reverse order and advertise it.
  bool out_of_order = false;
  /// Simulates a crash: the endpoint goes silent after this many responses.
  std::optional<std::size_t> crash_after;
};

StubMode parse_stub_mode(std::string_view name);

class StubScorer {
 public:
  explicit StubScorer(StubConfig config) : config_(config) {}

  Capability capability() const;
  double score(const ScoreRequest& request) const;
  const StubConfig& config() const { return config_; }

 private:
  StubConfig config_;
};

/// In-process channel that feeds request lines straight into a StubScorer.
/// Responses are produced when the channel is read, one batch at a time, so
/// out-of-order replies and crashes behave like a real endpoint.
class StubChannel : public LineChannel {
 public:
  explicit StubChannel(StubConfig config);

  void write_line(std::string_view line) override;
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
  void close() override { closed_ = true; }

 private:
  void flush_pending();

  StubScorer scorer_;
  bool hello_sent_ = false;
  bool closed_ = false;
  bool crashed_ = false;
  std::size_t responses_ = 0;
  std::vector<std::string> pending_;
  std::deque<std::string> outbox_;
};

/// Serves the stub over streams until `in` closes; returns a process exit code.
/// Batches are delimited by reading whatever is available, so a blocking
/// client sees replies after every `max_batch` requests or end of input.
int serve_stub(const StubConfig& config, std::istream& in, std::ostream& out);

// ---------------------------------------------------------------------------

struct ClientOptions {
  std::chrono::milliseconds batch_timeout{120000};
  std::chrono::milliseconds handshake_timeout{120000};
  /// Additional client-side ceiling on batch size; 0 = endpoint's limit only.
  std::size_t max_batch = 0;
};

/// Client side of the scorer protocol. Thread-safe: concurrent callers are
/// serialized one batch at a time.
class ScorerClient {
 public:
  explicit ScorerClient(std::unique_ptr<LineChannel> channel, ClientOptions options = {});
  ~ScorerClient();

  static std::unique_ptr<ScorerClient> launch(const std::string& command,
                                              ClientOptions options = {});
  static std::unique_ptr<ScorerClient> in_process(StubConfig config,
                                                  ClientOptions options = {});

  /// Idempotent; performed lazily by score_batch if not called explicitly.
  const Capability& handshake();

  /// Scores requests and returns responses in request order. Requests are
  /// split into batches no larger than the negotiated maximum.
  std::vector<ScoreResponse> score_batch(std::vector<ScoreRequest> requests);

  /// Convenience wrapper assigning fresh ids.
  std::vector<double> score(const std::vector<ScoreRequest>& requests);

  std::int64_t next_id();
  std::size_t batches_sent() const { return batches_sent_; }
  void shutdown();

 private:
  const Capability& handshake_locked();
  std::vector<ScoreResponse> exchange(const std::vector<ScoreRequest>& batch,
                                      std::size_t batch_index);

  std::unique_ptr<LineChannel> channel_;
  ClientOptions options_;
  std::optional<Capability> capability_;
  std::mutex mutex_;
  std::int64_t next_id_ = 0;
  std::size_t batches_sent_ = 0;
  bool broken_ = false;
};

}  // namespace mbrkit
