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

#include "mbrkit/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "mbrkit/error.hpp"
#include "mbrkit/metrics.hpp"
#include "mbrkit/utf8.hpp"

namespace mbrkit {

namespace {

using nlohmann::json;

std::string dump(const json& value) {
  return value.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string quote_line(std::string_view line) {
  constexpr std::size_t kMax = 200;
  std::string shown(line.substr(0, kMax));
  if (line.size() > kMax) shown += "...";
  return "'" + shown + "'";
}

json parse_object(std::string_view line, ErrorCode code, const char* what) {
  json value;
  try {
    value = json::parse(line);
  } catch (const json::exception&) {
    fail(code, std::string("malformed ") + what + " line " + quote_line(line));
  }
  if (!value.is_object()) fail(code, std::string("malformed ") + what + " line " + quote_line(line));
  return value;
}

}  // namespace

std::string encode_hello(const Capability& c) {
  json hello = {{"name", c.name},           {"version", c.version},
                {"needs_src", c.needs_src}, {"needs_ref", c.needs_ref},
                {"max_batch", c.max_batch}, {"out_of_order", c.out_of_order}};
  return dump(json{{"hello", hello}});
}

Capability decode_hello(std::string_view line) {
  json value;
  try {
    value = json::parse(line);
  } catch (const json::exception&) {
    fail(ErrorCode::kStartup, "expected hello record, got " + quote_line(line));
  }
  if (!value.is_object() || !value.contains("hello") || !value["hello"].is_object()) {
    fail(ErrorCode::kStartup, "expected hello record, got " + quote_line(line));
  }
  const json& h = value["hello"];
  Capability c;
  try {
    c.name = h.at("name").get<std::string>();
    c.version = h.value("version", std::string());
    c.needs_src = h.at("needs_src").get<bool>();
    c.needs_ref = h.at("needs_ref").get<bool>();
    c.max_batch = h.at("max_batch").get<std::size_t>();
    c.out_of_order = h.value("out_of_order", false);
  } catch (const json::exception& e) {
    fail(ErrorCode::kStartup, "incomplete hello record " + quote_line(line) + ": " + e.what());
  }
  if (c.max_batch == 0) fail(ErrorCode::kStartup, "hello announces max_batch 0");
  return c;
}

std::string encode_request(const ScoreRequest& r) {
  json value = {{"id", r.id}};
  if (r.src) value["src"] = *r.src;
  value["mt"] = r.mt;
  if (r.ref) value["ref"] = *r.ref;
  return dump(value);
}

ScoreRequest decode_request(std::string_view line) {
  const json value = parse_object(line, ErrorCode::kProtocol, "request");
  ScoreRequest r;
  try {
    r.id = value.at("id").get<std::int64_t>();
    r.mt = value.at("mt").get<std::string>();
    if (value.contains("src") && !value["src"].is_null()) r.src = value["src"].get<std::string>();
    if (value.contains("ref") && !value["ref"].is_null()) r.ref = value["ref"].get<std::string>();
  } catch (const json::exception&) {
    fail(ErrorCode::kProtocol, "malformed request line " + quote_line(line));
  }
  return r;
}

std::string encode_response(const ScoreResponse& r) {
  return dump(json{{"id", r.id}, {"score", r.score}});
}

ScoreResponse decode_response(std::string_view line) {
  const json value = parse_object(line, ErrorCode::kProtocol, "response");
  if (value.contains("error")) {
    fail(ErrorCode::kProtocol, "endpoint reported an error: " + quote_line(line));
  }
  ScoreResponse r;
  try {
    r.id = value.at("id").get<std::int64_t>();
    if (!value.at("score").is_number()) throw json::type_error::create(302, "score", nullptr);
    r.score = value.at("score").get<double>();
  } catch (const json::exception&) {
    fail(ErrorCode::kProtocol, "malformed response line " + quote_line(line));
  }
  if (!std::isfinite(r.score)) {
    fail(ErrorCode::kValidation, "non-finite score for id " + std::to_string(r.id));
  }
  return r;
}

void ProcessChannel::write_line(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  child_.write_all(data);
}

std::optional<std::string> ProcessChannel::read_line(std::chrono::milliseconds timeout) {
  return child_.read_line(timeout);
}

void ProcessChannel::close() {
  child_.close_stdin();
}

// ---------------------------------------------------------------------------

StubMode parse_stub_mode(std::string_view name) {
  if (name == "constant") return StubMode::kConstant;
  if (name == "overlap") return StubMode::kOverlap;
  if (name == "length-penalty") return StubMode::kLengthPenalty;
  fail(ErrorCode::kConfiguration, "unknown stub mode '" + std::string(name) +
                                      "' (expected constant, overlap or length-penalty)");
}

Capability StubScorer::capability() const {
  Capability c;
  switch (config_.mode) {
    case StubMode::kConstant: c.name = "stub-constant"; break;
    case StubMode::kOverlap: c.name = "stub-overlap"; break;
    case StubMode::kLengthPenalty: c.name = "stub-length-penalty"; break;
  }
  c.version = "1";
  c.needs_src = config_.needs_src;
  c.needs_ref = config_.mode != StubMode::kConstant;
  c.max_batch = config_.max_batch;
  c.out_of_order = config_.out_of_order;
  return c;
}

double StubScorer::score(const ScoreRequest& request) const {
  switch (config_.mode) {
    case StubMode::kConstant:
      return config_.constant;
    case StubMode::kOverlap:
      if (!request.ref) fail(ErrorCode::kProtocol, "request " + std::to_string(request.id) + " lacks ref");
      return chrf_sentence(request.mt, *request.ref) / 100.0;
    case StubMode::kLengthPenalty: {
      if (!request.ref) fail(ErrorCode::kProtocol, "request " + std::to_string(request.id) + " lacks ref");
      const double ref_len = static_cast<double>(utf8::length(*request.ref));
      if (ref_len == 0) return 0.0;
      const double mt_len = static_cast<double>(utf8::length(request.mt));
      return std::exp(-std::abs(mt_len - ref_len) / ref_len);
    }
  }
  return 0.0;
}

namespace {

// Scores one batch of request lines into response lines; malformed requests
// produce an error record carrying the offending id when it can be recovered.
std::vector<std::string> answer_batch(const StubScorer& scorer,
                                      const std::vector<std::string>& lines) {
  std::vector<std::string> replies;
  replies.reserve(lines.size());
  for (const auto& line : lines) {
    try {
      const ScoreRequest request = decode_request(line);
      replies.push_back(encode_response({request.id, scorer.score(request)}));
    } catch (const Error& e) {
      json err = {{"error", e.what()}};
      try {
        const json parsed = json::parse(line);
        if (parsed.is_object() && parsed.contains("id")) err["id"] = parsed["id"];
      } catch (const json::exception&) {
      }
      replies.push_back(dump(err));
    }
  }
  if (scorer.config().out_of_order) std::reverse(replies.begin(), replies.end());
  return replies;
}

}  // namespace

StubChannel::StubChannel(StubConfig config) : scorer_(config) {}

void StubChannel::write_line(std::string_view line) {
  if (closed_) fail(ErrorCode::kTransport, "stub endpoint closed");
  if (crashed_) fail(ErrorCode::kTransport, "write to endpoint failed: broken pipe");
  pending_.emplace_back(line);
}

void StubChannel::flush_pending() {
  if (pending_.empty()) return;
  auto replies = answer_batch(scorer_, pending_);
  pending_.clear();
  for (auto& reply : replies) {
    const auto& limit = scorer_.config().crash_after;
    if (limit && responses_ >= *limit) {
      crashed_ = true;
      return;
    }
    outbox_.push_back(std::move(reply));
    ++responses_;
  }
}

std::optional<std::string> StubChannel::read_line(std::chrono::milliseconds) {
  if (!hello_sent_) {
    hello_sent_ = true;
    return encode_hello(scorer_.capability());
  }
  if (outbox_.empty() && !crashed_) flush_pending();
  if (outbox_.empty()) {
    if (crashed_ || closed_) return std::nullopt;
    fail(ErrorCode::kTimeout, "no output from endpoint");
  }
  std::string line = std::move(outbox_.front());
  outbox_.pop_front();
  return line;
}

int serve_stub(const StubConfig& config, std::istream& in, std::ostream& out) {
  StubScorer scorer(config);
  out << encode_hello(scorer.capability()) << '\n' << std::flush;
  std::size_t responses = 0;
  std::vector<std::string> batch;
  auto flush = [&]() -> bool {
    for (const auto& reply : answer_batch(scorer, batch)) {
      if (config.crash_after && responses >= *config.crash_after) return false;
      out << reply << '\n';
      ++responses;
    }
    out << std::flush;
    batch.clear();
    return true;
  };
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    batch.push_back(line);
    // The client writes a whole batch and then blocks, so an empty input
    // buffer marks the end of a batch.
    if (batch.size() >= config.max_batch || in.rdbuf()->in_avail() <= 0) {
      if (!flush()) return 137;
    }
  }
  if (!batch.empty() && !flush()) return 137;
  return 0;
}

// ---------------------------------------------------------------------------

ScorerClient::ScorerClient(std::unique_ptr<LineChannel> channel, ClientOptions options)
    : channel_(std::move(channel)), options_(options) {}

ScorerClient::~ScorerClient() { shutdown(); }

std::unique_ptr<ScorerClient> ScorerClient::launch(const std::string& command,
                                                   ClientOptions options) {
  return std::make_unique<ScorerClient>(std::make_unique<ProcessChannel>(command), options);
}

std::unique_ptr<ScorerClient> ScorerClient::in_process(StubConfig config, ClientOptions options) {
  return std::make_unique<ScorerClient>(std::make_unique<StubChannel>(config), options);
}

void ScorerClient::shutdown() {
  std::lock_guard lock(mutex_);
  if (channel_) channel_->close();
}

std::int64_t ScorerClient::next_id() {
  std::lock_guard lock(mutex_);
  return next_id_++;
}

const Capability& ScorerClient::handshake() {
  std::lock_guard lock(mutex_);
  return handshake_locked();
}

const Capability& ScorerClient::handshake_locked() {
  if (capability_) return *capability_;
  std::optional<std::string> line;
  try {
    line = channel_->read_line(options_.handshake_timeout);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTimeout) {
      fail(ErrorCode::kStartup, "endpoint sent no hello within timeout");
    }
    throw Error(ErrorCode::kStartup, std::string("startup error: ") + e.what());
  }
  if (!line) fail(ErrorCode::kStartup, "endpoint exited before sending hello");
  capability_ = decode_hello(*line);
  return *capability_;
}

std::vector<ScoreResponse> ScorerClient::exchange(const std::vector<ScoreRequest>& batch,
                                                  std::size_t batch_index) {
  const std::string where = "batch " + std::to_string(batch_index);
  for (const auto& request : batch) channel_->write_line(encode_request(request));

  std::map<std::int64_t, std::size_t> position;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!position.emplace(batch[i].id, i).second) {
      fail(ErrorCode::kValidation, where + ": duplicate request id " + std::to_string(batch[i].id));
    }
  }
  std::vector<std::optional<double>> scores(batch.size());
  const auto deadline = std::chrono::steady_clock::now() + options_.batch_timeout;
  for (std::size_t received = 0; received < batch.size(); ++received) {
    const auto remaining = std::max(
        std::chrono::milliseconds(0),
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()));
    std::optional<std::string> line;
    try {
      line = channel_->read_line(remaining);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTimeout) {
        fail(ErrorCode::kTimeout, where + " timed out after " + std::to_string(received) +
                                      " of " + std::to_string(batch.size()) + " responses");
      }
      throw;
    }
    if (!line) {
      fail(ErrorCode::kTransport, where + ": endpoint closed after " + std::to_string(received) +
                                      " of " + std::to_string(batch.size()) + " responses");
    }
    ScoreResponse response;
    try {
      response = decode_response(*line);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
    const auto it = position.find(response.id);
    if (it == position.end() || scores[it->second]) {
      fail(ErrorCode::kProtocol, where + ": unexpected response id " + std::to_string(response.id));
    }
    if (!capability_->out_of_order && it->second != received) {
      fail(ErrorCode::kProtocol, where + ": response id " + std::to_string(response.id) +
                                     " out of order; endpoint did not declare out_of_order");
    }
    scores[it->second] = response.score;
  }
  std::vector<ScoreResponse> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back({batch[i].id, *scores[i]});
  return out;
}

std::vector<ScoreResponse> ScorerClient::score_batch(std::vector<ScoreRequest> requests) {
  if (requests.empty()) return {};
  std::lock_guard lock(mutex_);
  if (broken_) fail(ErrorCode::kTransport, "endpoint connection is no longer usable");
  const Capability& capability = handshake_locked();
  for (auto& request : requests) {
    if (capability.needs_src && !request.src) {
      fail(ErrorCode::kValidation, "endpoint '" + capability.name + "' needs src but request " +
                                       std::to_string(request.id) + " has none");
    }
    if (capability.needs_ref && !request.ref) {
      fail(ErrorCode::kValidation, "endpoint '" + capability.name + "' needs ref but request " +
                                       std::to_string(request.id) + " has none");
    }
    if (!capability.needs_src) request.src.reset();
    if (!capability.needs_ref) request.ref.reset();
  }
  std::size_t limit = capability.max_batch;
  if (options_.max_batch != 0) limit = std::min(limit, options_.max_batch);

  std::vector<ScoreResponse> out;
  out.reserve(requests.size());
  for (std::size_t start = 0; start < requests.size(); start += limit) {
    const std::size_t end = std::min(requests.size(), start + limit);
    std::vector<ScoreRequest> batch(requests.begin() + static_cast<std::ptrdiff_t>(start),
                                    requests.begin() + static_cast<std::ptrdiff_t>(end));
    try {
      auto responses = exchange(batch, batches_sent_);
      ++batches_sent_;
      out.insert(out.end(), responses.begin(), responses.end());
    } catch (...) {
      // A failed batch leaves unread replies in the pipe; refuse further use.
      broken_ = true;
      throw;
    }
  }
  return out;
}

std::vector<double> ScorerClient::score(const std::vector<ScoreRequest>& requests) {
  std::vector<ScoreRequest> numbered = requests;
  {
    std::lock_guard lock(mutex_);
    for (auto& r : numbered) r.id = next_id_++;
  }
  const auto responses = score_batch(std::move(numbered));
  std::vector<double> scores;
  scores.reserve(responses.size());
  for (const auto& r : responses) scores.push_back(r.score);
  return scores;
}

}  // namespace mbrkit
