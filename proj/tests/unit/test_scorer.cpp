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

#include <csignal>
#include <thread>

#include "mbrkit/metrics.hpp"
#include "mbrkit/scorer.hpp"
#include "support.hpp"

using namespace mbrkit;
using namespace std::chrono_literals;

namespace {

/// Replays scripted endpoint lines; request lines are recorded.
class ScriptedChannel : public LineChannel {
 public:
  explicit ScriptedChannel(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  void write_line(std::string_view line) override { written.emplace_back(line); }
  std::optional<std::string> read_line(std::chrono::milliseconds) override {
    if (next_ >= lines_.size()) return std::nullopt;
    return lines_[next_++];
  }
  void close() override {}

  std::vector<std::string> written;

 private:
  std::vector<std::string> lines_;
  std::size_t next_ = 0;
};

std::string hello(bool out_of_order = false) {
  Capability c;
  c.name = "scripted";
  c.version = "1";
  c.needs_ref = true;
  c.max_batch = 8;
  c.out_of_order = out_of_order;
  return encode_hello(c);
}

std::vector<ScoreRequest> requests(std::size_t n) {
  std::mt19937_64 rng(11);
  std::vector<ScoreRequest> out;
  for (std::size_t i = 0; i < n; ++i) {
    ScoreRequest r;
    r.src = "source " + std::to_string(i);
    r.mt = testing::random_sentence(rng);
    r.ref = testing::random_sentence(rng);
    out.push_back(r);
  }
  return out;
}

std::string cli() { return MBRKIT_CLI_PATH; }

}  // namespace

TEST_CASE("codec round trips") {
  Capability c{"metric", "2.1", true, false, 16, true};
  const Capability back = decode_hello(encode_hello(c));
  CHECK(back.name == "metric");
  CHECK(back.version == "2.1");
  CHECK(back.needs_src);
  CHECK_FALSE(back.needs_ref);
  CHECK(back.max_batch == 16);
  CHECK(back.out_of_order);

  ScoreRequest r{7, "quelle \"heure\"", "what time\tis it", std::nullopt};
  const ScoreRequest rb = decode_request(encode_request(r));
  CHECK(rb.id == 7);
  CHECK(rb.src == r.src);
  CHECK(rb.mt == r.mt);
  CHECK_FALSE(rb.ref);
  CHECK(encode_request(r).find('\n') == std::string::npos);

  CHECK(decode_response(encode_response({3, 0.25})) == ScoreResponse{3, 0.25});
}

TEST_CASE("codec rejects bad lines") {
  CHECK(testing::code_of([] { decode_hello("not json"); }) == ErrorCode::kStartup);
  CHECK(testing::code_of([] { decode_hello(R"({"id": 1})"); }) == ErrorCode::kStartup);
  CHECK(testing::code_of([] { decode_hello(R"({"hello": {"name": "x", "version": "1", "max_batch": 0}})"); }) ==
        ErrorCode::kStartup);
  CHECK(testing::code_of([] { decode_response(R"({"id": 1})"); }) == ErrorCode::kProtocol);
  CHECK(testing::code_of([] { decode_response(R"({"error": "boom", "id": 1})"); }) ==
        ErrorCode::kProtocol);
  CHECK(testing::code_of([] { decode_request("[]"); }) == ErrorCode::kProtocol);
}

TEST_CASE("stub modes") {
  ScoreRequest r{1, std::nullopt, "the cat sat", "the cat sat on the mat"};
  CHECK(StubScorer({StubMode::kConstant, 0.3}).score(r) == 0.3);
  CHECK(StubScorer({}).score(r) == doctest::Approx(chrf_sentence(r.mt, *r.ref) / 100));
  StubConfig lp;
  lp.mode = StubMode::kLengthPenalty;
  CHECK(StubScorer(lp).score(r) == doctest::Approx(std::exp(-11.0 / 22.0)));
  CHECK(parse_stub_mode("length-penalty") == StubMode::kLengthPenalty);
  CHECK(testing::code_of([] { parse_stub_mode("bogus"); }) == ErrorCode::kConfiguration);
}

TEST_CASE("in-process client scores in request order") {
  const auto reqs = requests(20);
  SUBCASE("batches respect the endpoint ceiling") {
    StubConfig cfg;
    cfg.max_batch = 8;
    auto client = ScorerClient::in_process(cfg);
    const auto scores = client->score(reqs);
    CHECK(client->batches_sent() >= 3);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      CHECK(scores[i] == doctest::Approx(chrf_sentence(reqs[i].mt, *reqs[i].ref) / 100));
    }
  }
  SUBCASE("client-side ceiling") {
    ClientOptions options;
    options.max_batch = 5;
    auto client = ScorerClient::in_process({}, options);
    client->score(reqs);
    CHECK(client->batches_sent() == 4);
  }
  SUBCASE("declared out-of-order replies are reassembled") {
    StubConfig cfg;
    cfg.out_of_order = true;
    cfg.max_batch = 7;
    auto client = ScorerClient::in_process(cfg);
    const auto scores = client->score(reqs);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      CHECK(scores[i] == doctest::Approx(chrf_sentence(reqs[i].mt, *reqs[i].ref) / 100));
    }
  }
  SUBCASE("crash mid-batch is a transport error") {
    StubConfig cfg;
    cfg.crash_after = 3;
    auto client = ScorerClient::in_process(cfg);
    const std::string msg = testing::message_of([&] { client->score(reqs); });
    CHECK(msg.find("after 3 of") != std::string::npos);
    CHECK(testing::code_of([&] { client->score(reqs); }) == ErrorCode::kTransport);
  }
  SUBCASE("empty input sends nothing") {
    auto client = ScorerClient::in_process({});
    CHECK(client->score({}).empty());
    CHECK(client->batches_sent() == 0);
  }
}

TEST_CASE("reference is stripped when the endpoint does not need it") {
  Capability c{"qe", "1", true, false, 4, false};
  auto channel = std::make_unique<ScriptedChannel>(
      std::vector<std::string>{encode_hello(c), encode_response({0, 0.1})});
  ScriptedChannel* raw = channel.get();
  ScorerClient client(std::move(channel));
  client.score_batch({{0, "src", "mt", "ref"}});
  REQUIRE(raw->written.size() == 1);
  CHECK(decode_request(raw->written[0]).src == "src");
  CHECK_FALSE(decode_request(raw->written[0]).ref);
  CHECK(testing::code_of([&] { client.score_batch({{1, std::nullopt, "mt", "ref"}}); }) ==
        ErrorCode::kValidation);
}

TEST_CASE("undeclared out-of-order replies are rejected") {
  ScorerClient client(std::make_unique<ScriptedChannel>(std::vector<std::string>{
      hello(false), encode_response({1, 0.2}), encode_response({0, 0.1})}));
  const std::vector<ScoreRequest> batch{{0, std::nullopt, "a", "a"}, {1, std::nullopt, "b", "b"}};
  CHECK(testing::message_of([&] { client.score_batch(batch); }).find("out of order") !=
        std::string::npos);
  CHECK(testing::code_of([&] { client.score_batch(batch); }) == ErrorCode::kTransport);
}

TEST_CASE("declared out-of-order replies are accepted") {
  ScorerClient client(std::make_unique<ScriptedChannel>(std::vector<std::string>{
      hello(true), encode_response({1, 0.2}), encode_response({0, 0.1})}));
  const auto out = client.score_batch({{0, std::nullopt, "a", "a"}, {1, std::nullopt, "b", "b"}});
  CHECK(out[0] == ScoreResponse{0, 0.1});
  CHECK(out[1] == ScoreResponse{1, 0.2});
}

TEST_CASE("unknown and duplicate response ids") {
  ScorerClient unknown(std::make_unique<ScriptedChannel>(
      std::vector<std::string>{hello(), encode_response({9, 0.2})}));
  CHECK(testing::code_of([&] { unknown.score_batch({{0, std::nullopt, "a", "a"}}); }) ==
        ErrorCode::kProtocol);
  ScorerClient nonfinite(std::make_unique<ScriptedChannel>(
      std::vector<std::string>{hello(), R"({"id": 0, "score": null})"}));
  CHECK(testing::code_of([&] { nonfinite.score_batch({{0, std::nullopt, "a", "a"}}); }) !=
        ErrorCode::kConfiguration);
  ScorerClient dup(std::make_unique<ScriptedChannel>(std::vector<std::string>{hello()}));
  CHECK(testing::code_of([&] {
          dup.score_batch({{4, std::nullopt, "a", "a"}, {4, std::nullopt, "b", "b"}});
        }) == ErrorCode::kValidation);
}

TEST_CASE("process endpoint") {
  const auto reqs = requests(30);
  SUBCASE("stub-scorer subprocess matches chrF") {
    auto client = ScorerClient::launch(cli() + " stub-scorer --max-batch 8");
    CHECK(client->handshake().max_batch == 8);
    const auto scores = client->score(reqs);
    CHECK(client->batches_sent() == 4);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      CHECK(scores[i] == doctest::Approx(chrf_sentence(reqs[i].mt, *reqs[i].ref) / 100).epsilon(1e-12));
    }
    client->shutdown();
  }
  SUBCASE("out-of-order subprocess") {
    auto client = ScorerClient::launch(cli() + " stub-scorer --out-of-order --max-batch 6");
    const auto scores = client->score(reqs);
    CHECK(scores[17] == doctest::Approx(chrf_sentence(reqs[17].mt, *reqs[17].ref) / 100));
  }
  SUBCASE("garbage hello") {
    CHECK(testing::code_of([] { ScorerClient::launch("echo garbage")->handshake(); }) ==
          ErrorCode::kStartup);
  }
  SUBCASE("endpoint exits before hello") {
    CHECK(testing::code_of([] { ScorerClient::launch("exit 3")->handshake(); }) ==
          ErrorCode::kStartup);
  }
  SUBCASE("silent endpoint times out") {
    ClientOptions options;
    options.batch_timeout = 200ms;
    const std::string cmd = "echo '" + hello() + "'; sleep 5";
    auto client = ScorerClient::launch(cmd, options);
    const auto start = std::chrono::steady_clock::now();
    CHECK(testing::code_of([&] { client->score(reqs); }) == ErrorCode::kTimeout);
    CHECK(std::chrono::steady_clock::now() - start < 3s);
  }
  SUBCASE("crashing subprocess") {
    auto client = ScorerClient::launch(cli() + " stub-scorer --crash-after 5");
    CHECK(testing::code_of([&] { client->score(reqs); }) == ErrorCode::kTransport);
  }
}

TEST_CASE("concurrent callers share one client") {
  auto client = ScorerClient::in_process({});
  const auto reqs = requests(40);
  std::vector<std::vector<double>> results(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] { results[t] = client->score(reqs); });
  }
  for (auto& t : threads) t.join();
  for (int t = 1; t < 4; ++t) CHECK(results[t] == results[0]);
}
