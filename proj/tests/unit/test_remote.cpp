// Copyright 2026 The draftgate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "draftgate/controller.h"
#include "draftgate/errors.h"
#include "draftgate/remote.h"
#include "draftgate/toygpt.h"
#include "httplib.h"
#include "json.hpp"
#include "oracles.h"

namespace dg = draftgate;
namespace rm = draftgate::remote;
using nlohmann::json;

namespace {

std::string url(int port) { return "http://127.0.0.1:" + std::to_string(port); }

// Minimal stand-in server for misbehaving peers.
class FakeServer {
 public:
  FakeServer() = default;
  ~FakeServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  int start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    return port_;
  }
  httplib::Server server;

 private:
  int port_ = 0;
  std::thread thread_;
};

std::string meta_body(int version) {
  rm::MetaReply m;
  m.protocol_version = version;
  m.info = {8, 4, "fake"};
  return rm::encode(m);
}

class RemoteTest : public ::testing::Test {
 protected:
  void SetUp() override { port_ = server_.start(); }
  std::unique_ptr<rm::RemoteBackend> client(rm::ClientOptions o = {}) { return rm::connect(url(port_), o); }

  dg::toygpt::ToyModel model_ = dg::toygpt::build_toy(13, 20, 6);
  rm::ProtocolServer server_{model_};
  int port_ = 0;
  std::vector<dg::PrefixItem> ctx_ = dg::discrete_items(std::vector<dg::TokenId>{4, 5});
};

TEST(Wire, ItemRoundTrip) {
  for (const rm::WireItem& item :
       {rm::WireItem{rm::WireToken{7}}, rm::WireItem{rm::WireVector{{0.25, -1.5}}},
        rm::WireItem{rm::WireHandle{"s/3"}}}) {
    EXPECT_EQ(rm::decode_wire_item(rm::encode(item)), item);
  }
  EXPECT_THROW(rm::decode_wire_item("{\"token\": 1, \"vector\": []}"), dg::ProtocolError);
  EXPECT_THROW(rm::decode_wire_item("{\"mystery\": 1}"), dg::ProtocolError);
  EXPECT_THROW(rm::decode_wire_item("not json"), dg::ProtocolError);
}

TEST(Wire, PrefixConversion) {
  const std::vector<dg::PrefixItem> prefix{dg::Discrete{3}, dg::Continuous{{0.5, 0.5}}};
  EXPECT_EQ(rm::to_wire(prefix), (std::vector<rm::WireItem>{rm::WireToken{3}, rm::WireVector{{0.5, 0.5}}}));
}

TEST(Wire, MessageRoundTrips) {
  rm::MetaReply meta;
  meta.info = {64, 16, "toy"};
  meta.tokenizer = true;
  meta.chat_template = dg::Template{{1}, {2}, {3}, {4}, {5, 6}};
  EXPECT_EQ(rm::decode_meta(rm::encode(meta)), meta);

  rm::StepRequest step;
  step.session_id = "s";
  step.seed = 0xFFFFFFFFFFFFFFFFULL;
  step.context = {rm::WireToken{1}, rm::WireHandle{"s/0"}, rm::WireVector{{0.1, 0.2}}};
  step.sampling = {0.7, 5, 0.9, 0.05, 0, true};
  step.inline_embedding = true;
  EXPECT_EQ(rm::decode_step_request(rm::encode(step)), step);

  rm::StepReply reply{3, 0.125, "s/1", dg::EmbeddingVector{0.1, 0.3}, dg::ProbVector{0.5, 0.5}};
  EXPECT_EQ(rm::decode_step_reply(rm::encode(reply)), reply);

  rm::TeacherRequest teacher{"s", {rm::WireToken{2}}, {"s/0", "s/1"}, {4, 5}, 0.6};
  EXPECT_EQ(rm::decode_teacher_request(rm::encode(teacher)), teacher);

  EXPECT_THROW(rm::decode_step_reply("{\"token\": 1}"), dg::ProtocolError);
}

TEST(Wire, EmptyEndpointRejected) { EXPECT_THROW(rm::RemoteBackend(""), dg::InvalidArgument); }

TEST_F(RemoteTest, MetaMirrorsTheBackend) {
  const auto c = client();
  EXPECT_EQ(c->info(), model_.info());
  EXPECT_EQ(c->default_template(), model_.default_template());
  EXPECT_EQ(c->token_piece(3), model_.token_piece(3));
  EXPECT_EQ(c->tokenize("12"), model_.tokenize("12"));
}

TEST_F(RemoteTest, UseBeforeConnectThrows) {
  rm::RemoteBackend c(url(port_));
  EXPECT_FALSE(c.connected());
  EXPECT_THROW(c.info(), dg::BackendError);
}

TEST(RemoteFailures, VersionMismatch) {
  FakeServer fake;
  fake.server.Get("/meta", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(meta_body(rm::kProtocolVersion + 1), "application/json");
  });
  const int port = fake.start();
  EXPECT_THROW(rm::connect(url(port)), dg::ProtocolError);
}

TEST(RemoteFailures, Timeout) {
  FakeServer fake;
  fake.server.Get("/meta", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(meta_body(rm::kProtocolVersion), "application/json");
  });
  const int port = fake.start();
  rm::ClientOptions o;
  o.timeout = std::chrono::milliseconds(100);
  try {
    rm::connect(url(port), o);
    FAIL() << "expected a timeout";
  } catch (const dg::TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos) << e.what();
  }
}

TEST(RemoteFailures, Unreachable) {
  int port = 0;
  {
    FakeServer probe;
    port = probe.start();
  }
  rm::ClientOptions o;
  o.timeout = std::chrono::milliseconds(500);
  EXPECT_THROW(rm::connect(url(port), o), dg::TransportError);
}

TEST(RemoteFailures, UnstructuredErrorIsAProtocolError) {
  FakeServer fake;
  fake.server.Get("/meta", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("oops", "text/plain");
  });
  const int port = fake.start();
  EXPECT_THROW(rm::connect(url(port)), dg::ProtocolError);
}

TEST(RemoteFailures, OutOfVocabularyToken) {
  FakeServer fake;
  fake.server.Get("/meta", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(meta_body(rm::kProtocolVersion), "application/json");
  });
  fake.server.Post("/step", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(rm::encode(rm::StepReply{99, 0.5, "s/0", std::nullopt, std::nullopt}), "application/json");
  });
  const int port = fake.start();
  const auto c = rm::connect(url(port));
  dg::SessionContext s("s", 1);
  const std::vector<dg::PrefixItem> prefix{dg::Discrete{1}};
  EXPECT_THROW(c->step(s, prefix, {}), dg::ProtocolError);
}

TEST_F(RemoteTest, RequestsWithoutVersionRejected) {
  httplib::Client raw(url(port_));
  const auto res = raw.Post("/session/close", json{{"session_id", "x"}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body).at("error").at("code"), "version_mismatch");
}

TEST_F(RemoteTest, HandlesAreSessionScoped) {
  const auto c = client();
  dg::SessionContext a("a", 1);
  const auto rec = c->step(a, ctx_, {});
  EXPECT_EQ(rec.embedding_handle, "a/0");

  rm::TeacherRequest cross{"b", rm::to_wire(ctx_), {rec.embedding_handle}, {rec.token}, 1.0};
  try {
    c->remote_teacher(cross);
    FAIL() << "cross-session handle accepted";
  } catch (const dg::RemoteError& e) {
    EXPECT_EQ(e.code(), "unknown_handle");
    EXPECT_FALSE(e.retryable());
  }
}

TEST_F(RemoteTest, ClosingFreesHandles) {
  const auto c = client();
  dg::SessionContext a("a", 1);
  const auto rec = c->step(a, ctx_, {});
  EXPECT_EQ(server_.live_sessions(), 1u);
  c->end_session(a);
  EXPECT_EQ(server_.live_sessions(), 0u);
  EXPECT_FALSE(c->close_session("a"));
  const std::vector<dg::StepRecord> records{rec};
  try {
    c->teacher_probs(a, ctx_, records, 1.0);
    FAIL() << "stale handle accepted";
  } catch (const dg::RemoteError& e) {
    EXPECT_EQ(e.code(), "unknown_handle");
  }
}

TEST_F(RemoteTest, ProbeSessionsDoNotLeak) {
  const auto c = client();
  c->next_distribution(ctx_);
  c->next_distribution(ctx_);
  EXPECT_EQ(server_.live_sessions(), 0u);
}

TEST_F(RemoteTest, InlineEmbeddingMatchesTheHandle) {
  rm::ClientOptions o;
  o.inline_embeddings = true;
  const auto c = client(o);
  dg::SessionContext s("inline", 2);
  const auto rec = c->step(s, ctx_, {});
  ASSERT_EQ(rec.embedding.size(), 6u);

  const auto expected = oracle::mix_embeddings(oracle::temper(model_.next_distribution(ctx_), 0.6), model_);
  for (std::size_t d = 0; d < expected.size(); ++d) {
    EXPECT_NEAR(rec.embedding[d], static_cast<double>(expected[d]), 1e-12);
  }

  auto by_handle = rm::to_wire(ctx_);
  by_handle.emplace_back(rm::WireHandle{rec.embedding_handle});
  auto by_value = rm::to_wire(ctx_);
  by_value.emplace_back(rm::WireVector{rec.embedding});
  const auto second = c->step(s, std::vector<dg::PrefixItem>{ctx_[0], ctx_[1], dg::Discrete{rec.token}}, {});
  const auto h = c->remote_teacher({"inline", by_handle, {second.embedding_handle}, {second.token}, 1.0});
  const auto v = c->remote_teacher({"inline", by_value, {second.embedding_handle}, {second.token}, 1.0});
  EXPECT_EQ(h.probs, v.probs);
}

TEST_F(RemoteTest, TeacherLengthMismatch) {
  const auto c = client();
  dg::SessionContext s("m", 2);
  const auto rec = c->step(s, ctx_, {});
  try {
    c->remote_teacher({"m", rm::to_wire(ctx_), {rec.embedding_handle}, {rec.token, rec.token}, 1.0});
    FAIL() << "mismatched lengths accepted";
  } catch (const dg::RemoteError& e) {
    EXPECT_EQ(e.code(), "length_mismatch");
  }
}

TEST_F(RemoteTest, RecordsWithoutHandlesRejected) {
  const auto c = client();
  dg::SessionContext s("h", 2);
  const std::vector<dg::StepRecord> bare{dg::make_step_record(1, 0.5, {})};
  EXPECT_THROW(c->teacher_probs(s, ctx_, bare, 1.0), dg::InvalidArgument);
}

TEST_F(RemoteTest, InvalidArgumentsMapTo400) {
  const auto c = client();
  dg::SessionContext s("bad", 2);
  const std::vector<dg::PrefixItem> oov{dg::Discrete{500}};
  try {
    c->step(s, oov, {});
    FAIL() << "out-of-vocabulary context accepted";
  } catch (const dg::RemoteError& e) {
    EXPECT_EQ(e.code(), "invalid_argument");
    EXPECT_FALSE(e.retryable());
  }
}

TEST(RemoteOverload, RetriedUntilServed) {
  const auto model = dg::toygpt::build_toy(13, 20, 6);
  rm::ProtocolServer server(model, rm::ServerOptions{2});
  const int port = server.start();
  rm::ClientOptions o;
  o.retry_backoff = std::chrono::milliseconds(1);
  const auto c = rm::connect(url(port), o);
  dg::SessionContext s("o", 1);
  const std::vector<dg::PrefixItem> prefix{dg::Discrete{1}};
  EXPECT_NO_THROW(c->step(s, prefix, {}));
}

TEST(RemoteOverload, ExhaustedRetriesAreRetryable) {
  const auto model = dg::toygpt::build_toy(13, 20, 6);
  rm::ProtocolServer server(model, rm::ServerOptions{10});
  const int port = server.start();
  rm::ClientOptions o;
  o.max_retries = 2;
  o.retry_backoff = std::chrono::milliseconds(1);
  const auto c = rm::connect(url(port), o);
  dg::SessionContext s("o", 1);
  const std::vector<dg::PrefixItem> prefix{dg::Discrete{1}};
  try {
    c->step(s, prefix, {});
    FAIL() << "expected overload";
  } catch (const dg::RemoteError& e) {
    EXPECT_EQ(e.code(), "overloaded");
    EXPECT_TRUE(e.retryable());
  }
}

TEST_F(RemoteTest, SessionsMatchLocalRuns) {
  const auto c = client();
  dg::SessionConfig config;
  config.max_draft_len = 12;
  config.max_think_budget = 16;
  config.max_final_len = 8;
  config.tau_a = -5.0;
  const auto tmpl = *model_.default_template();
  const auto question = *model_.tokenize("3*4=");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    dg::SessionContext local_session("r" + std::to_string(seed), seed);
    dg::SessionContext remote_session("r" + std::to_string(seed), seed);
    const auto local = dg::run_session(model_, question, config, tmpl, local_session);
    const auto remote = dg::run_session(*c, question, config, tmpl, remote_session);
    EXPECT_EQ(dg::tokens_of(remote.draft.records), dg::tokens_of(local.draft.records));
    EXPECT_EQ(dg::tokens_of(remote.final_answer.records), dg::tokens_of(local.final_answer.records));
    ASSERT_EQ(remote.kappa_a.has_value(), local.kappa_a.has_value());
    if (local.kappa_a) EXPECT_NEAR(*remote.kappa_a, *local.kappa_a, 1e-12);
    ASSERT_EQ(remote.chunks.size(), local.chunks.size());
    for (std::size_t k = 0; k < local.chunks.size(); ++k) {
      EXPECT_NEAR(*remote.chunks[k].kappa_r, *local.chunks[k].kappa_r, 1e-12);
      EXPECT_EQ(remote.chunks[k].visibility, local.chunks[k].visibility);
    }
  }
  EXPECT_EQ(server_.live_sessions(), 0u);
}

}  // namespace
