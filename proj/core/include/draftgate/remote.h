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

// JSON-over-HTTP protocol for backends hosted in another process.
//
//   GET  /meta            -> MetaReply
//   POST /step            StepRequest    -> StepReply
//   POST /teacher         TeacherRequest -> {"probs": [...]}
//   POST /session/close   {"session_id"} -> {"closed": bool}
//   POST /tokenize        {"text"}       -> {"tokens": [...]}   (optional)
//   POST /detokenize      {"tokens"}     -> {"text": "..."}     (optional)
//
// Every request carries "protocol_version". Errors come back as
// {"error": {"code", "message"}} with HTTP 400, or 503 for "overloaded",
// which the client retries. The server computes e_t itself and keeps it
// under a session-scoped handle; embeddings cross the wire only in inline
// (debug) mode.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "draftgate/backend.h"

namespace httplib {
class Server;
}

namespace draftgate::remote {

inline constexpr int kProtocolVersion = 1;

struct WireToken {
  TokenId token = 0;
  bool operator==(const WireToken&) const = default;
};
struct WireVector {
  EmbeddingVector vector;
  bool operator==(const WireVector&) const = default;
};
struct WireHandle {
  std::string handle;
  bool operator==(const WireHandle&) const = default;
};
using WireItem = std::variant<WireToken, WireVector, WireHandle>;

std::vector<WireItem> to_wire(std::span<const PrefixItem> items);

struct MetaReply {
  int protocol_version = kProtocolVersion;
  BackendInfo info;
  bool tokenizer = false;
  std::optional<Template> chat_template;
  bool operator==(const MetaReply&) const = default;
};

struct StepRequest {
  std::string session_id;
  std::uint64_t seed = 0;
  std::vector<WireItem> context;
  SamplingParams sampling;
  bool inline_embedding = false;
  // Debug: also return the raw next-token distribution.
  bool return_distribution = false;
  bool operator==(const StepRequest&) const = default;
};

struct StepReply {
  TokenId token = 0;
  double chosen_prob = 1.0;
  std::string embedding_handle;
  std::optional<EmbeddingVector> embedding;
  std::optional<ProbVector> distribution;
  bool operator==(const StepReply&) const = default;
};

struct TeacherRequest {
  std::string session_id;
  std::vector<WireItem> context;
  std::vector<std::string> tail_handles;
  std::vector<TokenId> targets;
  double temperature = 1.0;
  bool operator==(const TeacherRequest&) const = default;
};

// Wire encoding. decode_* throw ProtocolError on malformed input.
std::string encode(const WireItem& item);
WireItem decode_wire_item(std::string_view text);
std::string encode(const MetaReply& m);
MetaReply decode_meta(std::string_view text);
std::string encode(const StepRequest& r);
StepRequest decode_step_request(std::string_view text);
std::string encode(const StepReply& r);
StepReply decode_step_reply(std::string_view text);
std::string encode(const TeacherRequest& r);
TeacherRequest decode_teacher_request(std::string_view text);

struct ClientOptions {
  std::chrono::milliseconds timeout{10000};
  bool inline_embeddings = false;
  int max_retries = 3;
  std::chrono::milliseconds retry_backoff{50};
};

// Client realising the backend contract against a protocol server.
// token_embedding is not exposed by the protocol and throws
// UnsupportedOperation; next_distribution uses a throwaway probe session.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(std::string endpoint, ClientOptions options = {});

  // Fetches /meta and checks the protocol version.
  void connect();
  bool connected() const { return meta_.has_value(); }

  BackendInfo info() const override;
  EmbeddingVector token_embedding(TokenId v) const override;
  ProbVector next_distribution(std::span<const PrefixItem> prefix) const override;
  StepRecord step(SessionContext& session, std::span<const PrefixItem> prefix,
                  const SamplingParams& params) const override;
  TeacherScores teacher_probs(SessionContext& session, std::span<const PrefixItem> context,
                              std::span<const StepRecord> records,
                              double temperature) const override;
  void end_session(SessionContext& session) const override;
  std::optional<std::string> token_piece(TokenId v) const override;
  std::optional<std::vector<TokenId>> tokenize(std::string_view text) const override;
  std::optional<Template> default_template() const override;

  StepReply remote_step(const StepRequest& request) const;
  TeacherScores remote_teacher(const TeacherRequest& request) const;
  bool close_session(const std::string& session_id) const;

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;
  const MetaReply& meta() const;

  std::string endpoint_;
  ClientOptions options_;
  std::optional<MetaReply> meta_;
  mutable std::atomic<std::uint64_t> probe_counter_{0};
};

std::unique_ptr<RemoteBackend> connect(std::string endpoint, ClientOptions options = {});

struct ServerOptions {
  // Reply "overloaded" to this many /step requests before serving (tests).
  int inject_overloads = 0;
};

// Serves any local backend over the protocol; the reference implementation
// the client is tested against.
class ProtocolServer {
 public:
  explicit ProtocolServer(const Backend& backend, ServerOptions options = {});
  ~ProtocolServer();
  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks serving on the calling thread.
  void serve(const std::string& host, int port);
  void stop();

  std::size_t live_sessions() const;

 private:
  struct Session {
    Rng rng;
    std::map<std::string, EmbeddingVector> handles;
    std::uint64_t next_handle = 0;
  };

  void install_routes();
  std::vector<PrefixItem> resolve(const std::string& session_id,
                                  const std::vector<WireItem>& items) const;

  const Backend& backend_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  mutable std::mutex mu_;
  std::map<std::string, Session> sessions_;
  int overloads_left_;
};

}  // namespace draftgate::remote
