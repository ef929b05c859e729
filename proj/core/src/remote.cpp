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

#include "draftgate/remote.h"

#include <string>
#include <utility>

#include "draftgate/errors.h"
#include "httplib.h"
#include "json.hpp"

namespace draftgate::remote {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

json item_json(const WireItem& item) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WireToken>) {
          return {{"token", v.token}};
        } else if constexpr (std::is_same_v<T, WireVector>) {
          return {{"vector", v.vector}};
        } else {
          return {{"handle", v.handle}};
        }
      },
      item);
}

WireItem item_from(const json& j) {
  if (!j.is_object() || j.size() != 1) throw ProtocolError("wire item must have exactly one key");
  if (j.contains("token")) return WireToken{j.at("token").get<TokenId>()};
  if (j.contains("vector")) return WireVector{j.at("vector").get<EmbeddingVector>()};
  if (j.contains("handle")) return WireHandle{j.at("handle").get<std::string>()};
  throw ProtocolError("unknown wire item kind");
}

json items_json(const std::vector<WireItem>& items) {
  json out = json::array();
  for (const auto& i : items) out.push_back(item_json(i));
  return out;
}

std::vector<WireItem> items_from(const json& j) {
  std::vector<WireItem> out;
  for (const auto& i : j) out.push_back(item_from(i));
  return out;
}

json sampling_json(const SamplingParams& s) {
  return {{"temperature", s.temperature}, {"top_k", s.top_k},   {"top_p", s.top_p},
          {"min_p", s.min_p},             {"seed", s.seed},     {"greedy", s.greedy}};
}

SamplingParams sampling_from(const json& j) {
  SamplingParams s;
  s.temperature = j.at("temperature").get<double>();
  s.top_k = j.at("top_k").get<int>();
  s.top_p = j.at("top_p").get<double>();
  s.min_p = j.at("min_p").get<double>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.greedy = j.value("greedy", false);
  return s;
}

json template_json(const Template& t) {
  return {{"prompt_prefix", t.prompt_prefix}, {"prompt_suffix", t.prompt_suffix},
          {"think_open", t.think_open},       {"think_close", t.think_close},
          {"end_tokens", t.end_tokens}};
}

Template template_from(const json& j) {
  Template t;
  t.prompt_prefix = j.value("prompt_prefix", std::vector<TokenId>{});
  t.prompt_suffix = j.value("prompt_suffix", std::vector<TokenId>{});
  t.think_open = j.at("think_open").get<std::vector<TokenId>>();
  t.think_close = j.at("think_close").get<std::vector<TokenId>>();
  t.end_tokens = j.at("end_tokens").get<std::vector<TokenId>>();
  return t;
}

// Parses and converts, turning any json failure into ProtocolError.
template <typename F>
auto decode_with(std::string_view text, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
}

json with_version(json j) {
  j["protocol_version"] = kProtocolVersion;
  return j;
}

}  // namespace

std::vector<WireItem> to_wire(std::span<const PrefixItem> items) {
  std::vector<WireItem> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    if (const auto* d = std::get_if<Discrete>(&item)) {
      out.emplace_back(WireToken{d->token});
    } else {
      out.emplace_back(WireVector{std::get<Continuous>(item).embedding});
    }
  }
  return out;
}

std::string encode(const WireItem& item) { return item_json(item).dump(); }

WireItem decode_wire_item(std::string_view text) {
  return decode_with(text, [](const json& j) { return item_from(j); });
}

std::string encode(const MetaReply& m) {
  json j = {{"protocol_version", m.protocol_version},
            {"vocab_size", m.info.vocab_size},
            {"embedding_dim", m.info.embedding_dim},
            {"identifier", m.info.identifier},
            {"tokenizer", m.tokenizer}};
  if (m.chat_template) j["template"] = template_json(*m.chat_template);
  return j.dump();
}

MetaReply decode_meta(std::string_view text) {
  return decode_with(text, [](const json& j) {
    MetaReply m;
    m.protocol_version = j.at("protocol_version").get<int>();
    m.info.vocab_size = j.at("vocab_size").get<int>();
    m.info.embedding_dim = j.at("embedding_dim").get<int>();
    m.info.identifier = j.value("identifier", std::string{});
    m.tokenizer = j.value("tokenizer", false);
    if (j.contains("template") && !j.at("template").is_null()) {
      m.chat_template = template_from(j.at("template"));
    }
    return m;
  });
}

std::string encode(const StepRequest& r) {
  return with_version({{"session_id", r.session_id},
                       {"seed", r.seed},
                       {"context", items_json(r.context)},
                       {"sampling", sampling_json(r.sampling)},
                       {"inline_embedding", r.inline_embedding},
                       {"return_distribution", r.return_distribution}})
      .dump();
}

StepRequest decode_step_request(std::string_view text) {
  return decode_with(text, [](const json& j) {
    StepRequest r;
    r.session_id = j.at("session_id").get<std::string>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.context = items_from(j.at("context"));
    r.sampling = sampling_from(j.at("sampling"));
    r.inline_embedding = j.value("inline_embedding", false);
    r.return_distribution = j.value("return_distribution", false);
    return r;
  });
}

std::string encode(const StepReply& r) {
  json j = {{"token", r.token}, {"p", r.chosen_prob}, {"handle", r.embedding_handle}};
  if (r.embedding) j["embedding"] = *r.embedding;
  if (r.distribution) j["distribution"] = *r.distribution;
  return j.dump();
}

StepReply decode_step_reply(std::string_view text) {
  return decode_with(text, [](const json& j) {
    StepReply r;
    r.token = j.at("token").get<TokenId>();
    r.chosen_prob = j.at("p").get<double>();
    r.embedding_handle = j.at("handle").get<std::string>();
    if (j.contains("embedding")) r.embedding = j.at("embedding").get<EmbeddingVector>();
    if (j.contains("distribution")) r.distribution = j.at("distribution").get<ProbVector>();
    return r;
  });
}

std::string encode(const TeacherRequest& r) {
  return with_version({{"session_id", r.session_id},
                       {"context", items_json(r.context)},
                       {"tail_handles", r.tail_handles},
                       {"targets", r.targets},
                       {"temperature", r.temperature}})
      .dump();
}

TeacherRequest decode_teacher_request(std::string_view text) {
  return decode_with(text, [](const json& j) {
    TeacherRequest r;
    r.session_id = j.at("session_id").get<std::string>();
    r.context = items_from(j.at("context"));
    r.tail_handles = j.at("tail_handles").get<std::vector<std::string>>();
    r.targets = j.at("targets").get<std::vector<TokenId>>();
    r.temperature = j.at("temperature").get<double>();
    return r;
  });
}

// ---------------------------------------------------------------- client

RemoteBackend::RemoteBackend(std::string endpoint, ClientOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  if (endpoint_.empty()) throw InvalidArgument("empty endpoint");
}

namespace {

std::unique_ptr<httplib::Client> make_client(const std::string& endpoint,
                                             const ClientOptions& options) {
  auto cli = std::make_unique<httplib::Client>(endpoint);
  if (!cli->is_valid()) throw TransportError("invalid endpoint '" + endpoint + "'");
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout).count();
  cli->set_connection_timeout(us / 1000000, us % 1000000);
  cli->set_read_timeout(us / 1000000, us % 1000000);
  cli->set_write_timeout(us / 1000000, us % 1000000);
  return cli;
}

[[noreturn]] void throw_transport(const std::string& endpoint, httplib::Error err) {
  const std::string what = httplib::to_string(err);
  if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
    throw TransportError("request to " + endpoint + " timed out or was cut off: " + what);
  }
  throw TransportError("cannot reach " + endpoint + ": " + what);
}

// Maps a non-200 reply to RemoteError when it carries a structured error,
// ProtocolError otherwise.
[[noreturn]] void throw_reply(const httplib::Result& res) {
  json j;
  try {
    j = json::parse(res->body);
  } catch (const json::exception&) {
    throw ProtocolError("HTTP " + std::to_string(res->status) + " without an error body");
  }
  if (!j.contains("error") || !j.at("error").is_object()) {
    throw ProtocolError("HTTP " + std::to_string(res->status) + " without an error object");
  }
  const auto& e = j.at("error");
  throw RemoteError(e.value("code", std::string("unknown")), e.value("message", std::string{}),
                    res->status == 503);
}

}  // namespace

std::string RemoteBackend::get(const std::string& path) const {
  auto cli = make_client(endpoint_, options_);
  auto res = cli->Get(path);
  if (!res) throw_transport(endpoint_, res.error());
  if (res->status != 200) throw_reply(res);
  return res->body;
}

std::string RemoteBackend::post(const std::string& path, const std::string& body) const {
  auto cli = make_client(endpoint_, options_);
  for (int attempt = 0;; ++attempt) {
    auto res = cli->Post(path, body, kJson);
    if (!res) throw_transport(endpoint_, res.error());
    if (res->status == 200) return res->body;
    if (res->status == 503 && attempt < options_.max_retries) {
      std::this_thread::sleep_for(options_.retry_backoff * (attempt + 1));
      continue;
    }
    throw_reply(res);
  }
}

void RemoteBackend::connect() {
  MetaReply m = decode_meta(get("/meta"));
  if (m.protocol_version != kProtocolVersion) {
    throw ProtocolError("server speaks protocol version " + std::to_string(m.protocol_version) +
                        ", client speaks " + std::to_string(kProtocolVersion));
  }
  if (m.info.vocab_size < 1 || m.info.embedding_dim < 1) {
    throw ProtocolError("server reported an empty vocabulary or embedding");
  }
  meta_ = std::move(m);
}

const MetaReply& RemoteBackend::meta() const {
  if (!meta_) throw BackendError("remote backend used before connect()");
  return *meta_;
}

BackendInfo RemoteBackend::info() const { return meta().info; }

EmbeddingVector RemoteBackend::token_embedding(TokenId /*v*/) const {
  throw UnsupportedOperation("the remote protocol does not expose token embeddings");
}

StepReply RemoteBackend::remote_step(const StepRequest& request) const {
  meta();
  StepReply r = decode_step_reply(post("/step", encode(request)));
  if (r.token < 0 || r.token >= meta().info.vocab_size) {
    throw ProtocolError("server returned an out-of-vocabulary token");
  }
  if (!(r.chosen_prob > 0.0 && r.chosen_prob <= 1.0)) {
    throw ProtocolError("server returned a chosen probability outside (0, 1]");
  }
  return r;
}

TeacherScores RemoteBackend::remote_teacher(const TeacherRequest& request) const {
  meta();
  const std::string body = post("/teacher", encode(request));
  return decode_with(body, [&](const json& j) {
    TeacherScores s{j.at("probs").get<std::vector<double>>()};
    if (s.probs.size() != request.targets.size()) {
      throw ProtocolError("teacher reply length does not match the targets");
    }
    return s;
  });
}

bool RemoteBackend::close_session(const std::string& session_id) const {
  const json req = with_version({{"session_id", session_id}});
  const std::string body = post("/session/close", req.dump());
  return decode_with(body, [](const json& j) { return j.value("closed", false); });
}

ProbVector RemoteBackend::next_distribution(std::span<const PrefixItem> prefix) const {
  StepRequest req;
  req.session_id = "probe-" + std::to_string(probe_counter_.fetch_add(1));
  req.context = to_wire(prefix);
  req.sampling.greedy = true;
  req.return_distribution = true;
  const StepReply r = remote_step(req);
  close_session(req.session_id);
  if (!r.distribution) throw ProtocolError("server did not return the requested distribution");
  return *r.distribution;
}

StepRecord RemoteBackend::step(SessionContext& session, std::span<const PrefixItem> prefix,
                               const SamplingParams& params) const {
  StepRequest req;
  req.session_id = session.id;
  req.seed = session.seed;
  req.context = to_wire(prefix);
  req.sampling = params;
  req.inline_embedding = options_.inline_embeddings;
  StepReply r = remote_step(req);
  return make_step_record(r.token, r.chosen_prob, r.embedding.value_or(EmbeddingVector{}),
                          std::move(r.embedding_handle));
}

TeacherScores RemoteBackend::teacher_probs(SessionContext& session,
                                           std::span<const PrefixItem> context,
                                           std::span<const StepRecord> records,
                                           double temperature) const {
  TeacherRequest req;
  req.session_id = session.id;
  req.context = to_wire(context);
  req.temperature = temperature;
  for (const auto& r : records) {
    if (r.embedding_handle.empty()) {
      throw InvalidArgument("remote teacher pass needs records carrying embedding handles");
    }
    req.tail_handles.push_back(r.embedding_handle);
    req.targets.push_back(r.token);
  }
  return remote_teacher(req);
}

void RemoteBackend::end_session(SessionContext& session) const { close_session(session.id); }

std::optional<std::string> RemoteBackend::token_piece(TokenId v) const {
  if (!meta().tokenizer) return std::nullopt;
  const json req = with_version({{"tokens", std::vector<TokenId>{v}}});
  const std::string body = post("/detokenize", req.dump());
  return decode_with(body, [](const json& j) { return j.at("text").get<std::string>(); });
}

std::optional<std::vector<TokenId>> RemoteBackend::tokenize(std::string_view text) const {
  if (!meta().tokenizer) return std::nullopt;
  const json req = with_version({{"text", std::string(text)}});
  const std::string body = post("/tokenize", req.dump());
  return decode_with(body,
                     [](const json& j) { return j.at("tokens").get<std::vector<TokenId>>(); });
}

std::optional<Template> RemoteBackend::default_template() const { return meta().chat_template; }

std::unique_ptr<RemoteBackend> connect(std::string endpoint, ClientOptions options) {
  auto backend = std::make_unique<RemoteBackend>(std::move(endpoint), options);
  backend->connect();
  return backend;
}

// ---------------------------------------------------------------- server

namespace {

struct RequestFailure {
  int status;
  std::string code;
  std::string message;
};

void reply_error(httplib::Response& res, const RequestFailure& f) {
  res.status = f.status;
  res.set_content(json{{"error", {{"code", f.code}, {"message", f.message}}}}.dump(), kJson);
}

void check_version(const httplib::Request& req) {
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::exception&) {
    throw RequestFailure{400, "bad_request", "body is not JSON"};
  }
  if (!j.contains("protocol_version") || j.at("protocol_version") != kProtocolVersion) {
    throw RequestFailure{400, "version_mismatch",
                         "expected protocol_version " + std::to_string(kProtocolVersion)};
  }
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      check_version(req);
      res.set_content(f(req), kJson);
    } catch (const RequestFailure& fail) {
      reply_error(res, fail);
    } catch (const ProtocolError& e) {
      reply_error(res, {400, "bad_request", e.what()});
    } catch (const InvalidArgument& e) {
      reply_error(res, {400, "invalid_argument", e.what()});
    } catch (const Error& e) {
      reply_error(res, {500, "backend_error", e.what()});
    }
  };
}

}  // namespace

ProtocolServer::ProtocolServer(const Backend& backend, ServerOptions options)
    : backend_(backend),
      options_(options),
      server_(std::make_unique<httplib::Server>()),
      overloads_left_(options.inject_overloads) {
  install_routes();
}

ProtocolServer::~ProtocolServer() { stop(); }

std::vector<PrefixItem> ProtocolServer::resolve(const std::string& session_id,
                                                const std::vector<WireItem>& items) const {
  std::vector<PrefixItem> out;
  out.reserve(items.size());
  const auto session = sessions_.find(session_id);
  for (const auto& item : items) {
    if (const auto* t = std::get_if<WireToken>(&item)) {
      out.emplace_back(Discrete{t->token});
    } else if (const auto* v = std::get_if<WireVector>(&item)) {
      out.emplace_back(Continuous{v->vector});
    } else {
      const auto& h = std::get<WireHandle>(item).handle;
      if (session == sessions_.end() || !session->second.handles.count(h)) {
        throw RequestFailure{400, "unknown_handle", "handle '" + h + "' is not live in session '" +
                                                        session_id + "'"};
      }
      out.emplace_back(Continuous{session->second.handles.at(h)});
    }
  }
  return out;
}

void ProtocolServer::install_routes() {
  server_->Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
    MetaReply m;
    m.info = backend_.info();
    m.tokenizer = backend_.token_piece(0).has_value();
    m.chat_template = backend_.default_template();
    res.set_content(encode(m), kJson);
  });

  server_->Post("/step", guarded([this](const httplib::Request& req) {
    const StepRequest r = decode_step_request(req.body);
    std::lock_guard lock(mu_);
    if (overloads_left_ > 0) {
      --overloads_left_;
      throw RequestFailure{503, "overloaded", "try again"};
    }
    auto [it, fresh] = sessions_.try_emplace(r.session_id);
    if (fresh) it->second.rng = Rng(r.seed);
    Session& s = it->second;
    const auto prefix = resolve(r.session_id, r.context);
    const ProbVector raw = backend_.next_distribution(prefix);
    const TokenId token = sample(raw, r.sampling, s.rng);
    const ProbVector decoding = apply_temperature(raw, r.sampling.temperature);

    StepReply reply;
    reply.token = token;
    reply.chosen_prob = gather(decoding, token);
    EmbeddingVector e = mixed_embedding(decoding, backend_);
    reply.embedding_handle = r.session_id + "/" + std::to_string(s.next_handle++);
    if (r.inline_embedding) reply.embedding = e;
    if (r.return_distribution) reply.distribution = raw;
    s.handles.emplace(reply.embedding_handle, std::move(e));
    return encode(reply);
  }));

  server_->Post("/teacher", guarded([this](const httplib::Request& req) {
    const TeacherRequest r = decode_teacher_request(req.body);
    if (r.tail_handles.size() != r.targets.size()) {
      throw RequestFailure{400, "length_mismatch", "tail_handles and targets differ in length"};
    }
    std::lock_guard lock(mu_);
    const auto context = resolve(r.session_id, r.context);
    std::vector<WireItem> tail_items;
    for (const auto& h : r.tail_handles) tail_items.emplace_back(WireHandle{h});
    const auto tail = resolve(r.session_id, tail_items);
    std::vector<StepRecord> records;
    records.reserve(tail.size());
    for (std::size_t i = 0; i < tail.size(); ++i) {
      records.push_back(make_step_record(r.targets[i], 1.0, std::get<Continuous>(tail[i]).embedding));
    }
    SessionContext scratch(r.session_id);
    const TeacherScores scores = backend_.teacher_probs(scratch, context, records, r.temperature);
    return json{{"probs", scores.probs}}.dump();
  }));

  server_->Post("/session/close", guarded([this](const httplib::Request& req) {
    const auto id = decode_with(req.body, [](const json& j) {
      return j.at("session_id").get<std::string>();
    });
    std::lock_guard lock(mu_);
    return json{{"closed", sessions_.erase(id) > 0}}.dump();
  }));

  server_->Post("/tokenize", guarded([this](const httplib::Request& req) {
    const auto text = decode_with(req.body, [](const json& j) {
      return j.at("text").get<std::string>();
    });
    const auto tokens = backend_.tokenize(text);
    if (!tokens) throw RequestFailure{400, "unsupported", "text cannot be tokenized"};
    return json{{"tokens", *tokens}}.dump();
  }));

  server_->Post("/detokenize", guarded([this](const httplib::Request& req) {
    const auto tokens = decode_with(req.body, [](const json& j) {
      return j.at("tokens").get<std::vector<TokenId>>();
    });
    return json{{"text", detokenize(backend_, tokens)}}.dump();
  }));
}

int ProtocolServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw InvalidArgument("server already started");
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw TransportError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ProtocolServer::serve(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ProtocolServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::size_t ProtocolServer::live_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace draftgate::remote
