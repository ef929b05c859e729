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

#include "draftgate/transcript_io.h"

#include <cstdio>
#include <sstream>
#include <string>

#include "draftgate/errors.h"
#include "json.hpp"

namespace draftgate {
namespace {

using nlohmann::json;

const char* role_name(SegmentRole r) {
  switch (r) {
    case SegmentRole::kQuestion:
      return "question";
    case SegmentRole::kDraftAnswer:
      return "draft";
    case SegmentRole::kThinkChunk:
      return "think";
    case SegmentRole::kFinalAnswer:
      return "final";
  }
  return "draft";
}

SegmentRole parse_role(const std::string& s) {
  if (s == "question") return SegmentRole::kQuestion;
  if (s == "draft") return SegmentRole::kDraftAnswer;
  if (s == "think") return SegmentRole::kThinkChunk;
  if (s == "final") return SegmentRole::kFinalAnswer;
  throw InvalidArgument("unknown segment role '" + s + "'");
}

StopReason parse_stop(const std::string& s) {
  for (auto r : {StopReason::kNone, StopReason::kStopToken, StopReason::kEos, StopReason::kBudget,
                 StopReason::kError}) {
    if (s == to_string(r)) return r;
  }
  throw InvalidArgument("unknown stop reason '" + s + "'");
}

json record_to_json(const StepRecord& r) {
  json j = {{"token", r.token}, {"p", r.chosen_prob}, {"logp", r.chosen_logprob},
            {"e", r.embedding}};
  if (!r.embedding_handle.empty()) j["handle"] = r.embedding_handle;
  return j;
}

StepRecord record_from_json(const json& j) {
  StepRecord r;
  r.token = j.at("token").get<TokenId>();
  r.chosen_prob = j.at("p").get<double>();
  r.chosen_logprob = j.at("logp").get<double>();
  r.embedding = j.at("e").get<EmbeddingVector>();
  if (j.contains("handle")) r.embedding_handle = j.at("handle").get<std::string>();
  return r;
}

json segment_to_json(const Segment& s) {
  json records = json::array();
  for (const auto& r : s.records) records.push_back(record_to_json(r));
  json j = {{"role", role_name(s.role)}, {"records", std::move(records)},
            {"stop_reason", to_string(s.stop_reason)}};
  if (s.role == SegmentRole::kThinkChunk) j["index"] = s.chunk_index;
  if (s.role == SegmentRole::kQuestion) j["tokens"] = s.tokens;
  return j;
}

Segment segment_from_json(const json& j) {
  Segment s;
  s.role = parse_role(j.at("role").get<std::string>());
  for (const auto& r : j.at("records")) s.records.push_back(record_from_json(r));
  s.stop_reason = parse_stop(j.at("stop_reason").get<std::string>());
  if (j.contains("index")) s.chunk_index = j.at("index").get<int>();
  if (j.contains("tokens")) s.tokens = j.at("tokens").get<std::vector<TokenId>>();
  return s;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> parse_optional_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string transcript_to_json_line(const Transcript& t) {
  json chunks = json::array();
  for (const auto& c : t.chunks) {
    chunks.push_back({{"segment", segment_to_json(c.segment)},
                      {"kappa_r", optional_number(c.kappa_r)},
                      {"visibility", c.visibility}});
  }
  json span = t.kappa_span ? json::array({t.kappa_span->begin, t.kappa_span->end}) : json(nullptr);
  json j = {
      {"mode", to_string(t.mode)},
      {"status", to_string(t.status)},
      {"question", t.question},
      {"draft", segment_to_json(t.draft)},
      {"draft_truncated", t.draft_truncated},
      {"kappa_a", optional_number(t.kappa_a)},
      {"kappa_span", span},
      {"span_fallback", t.span_fallback},
      {"decision", to_string(t.decision)},
      {"chunk_size", t.chunk_size},
      {"chunks", std::move(chunks)},
      {"final_visibility", t.final_visibility},
      {"final", segment_to_json(t.final_answer)},
      {"counts",
       {{"draft_tokens", t.counts.draft_tokens},
        {"think_tokens", t.counts.think_tokens},
        {"total", t.counts.total}}},
  };
  return j.dump();
}

Transcript transcript_from_json_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    Transcript t;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "copt") {
      t.mode = SessionMode::kCopt;
    } else if (mode == "cot") {
      t.mode = SessionMode::kCot;
    } else {
      throw InvalidArgument("unknown mode '" + mode + "'");
    }
    const auto status = j.at("status").get<std::string>();
    if (status == "complete") {
      t.status = SessionStatus::kComplete;
    } else if (status == "truncated") {
      t.status = SessionStatus::kTruncated;
    } else if (status == "empty_draft") {
      t.status = SessionStatus::kEmptyDraft;
    } else {
      throw InvalidArgument("unknown status '" + status + "'");
    }
    t.question = j.at("question").get<std::vector<TokenId>>();
    t.draft = segment_from_json(j.at("draft"));
    t.draft_truncated = j.at("draft_truncated").get<bool>();
    t.kappa_a = parse_optional_number(j.at("kappa_a"));
    if (const auto& span = j.at("kappa_span"); !span.is_null()) {
      t.kappa_span = IndexRange{span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()};
    }
    t.span_fallback = j.at("span_fallback").get<bool>();
    const auto decision = j.at("decision").get<std::string>();
    if (decision == "accepted") {
      t.decision = Decision::kAccepted;
    } else if (decision == "think_triggered") {
      t.decision = Decision::kThinkTriggered;
    } else {
      throw InvalidArgument("unknown decision '" + decision + "'");
    }
    t.chunk_size = j.at("chunk_size").get<int>();
    for (const auto& c : j.at("chunks")) {
      t.chunks.push_back(ChunkRecord{segment_from_json(c.at("segment")),
                                     parse_optional_number(c.at("kappa_r")),
                                     c.at("visibility").get<int>()});
    }
    t.final_visibility = j.at("final_visibility").get<int>();
    t.final_answer = segment_from_json(j.at("final"));
    const auto& counts = j.at("counts");
    t.counts = TokenCounts{counts.at("draft_tokens").get<std::size_t>(),
                           counts.at("think_tokens").get<std::size_t>(),
                           counts.at("total").get<std::size_t>()};
    return t;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed trace line: ") + e.what());
  }
}

std::vector<Transcript> read_trace(std::istream& in) {
  std::vector<Transcript> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(transcript_from_json_line(line));
  }
  return out;
}

namespace {

std::string render_tokens(std::span<const TokenId> tokens, const std::vector<std::string>* pieces) {
  std::string out;
  for (TokenId t : tokens) {
    if (pieces && t >= 0 && static_cast<std::size_t>(t) < pieces->size()) {
      out += (*pieces)[static_cast<std::size_t>(t)];
    } else {
      if (!out.empty()) out += ' ';
      out += std::to_string(t);
    }
  }
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string render_transcript(const Transcript& t, const std::vector<std::string>* pieces) {
  std::ostringstream os;
  os << "mode      : " << to_string(t.mode) << "  status: " << to_string(t.status) << '\n';
  os << "question  : " << render_tokens(t.question, pieces) << '\n';
  if (t.mode == SessionMode::kCopt) {
    const auto draft = tokens_of(t.draft.records);
    os << "draft     : " << render_tokens(draft, pieces) << "  (" << draft.size() << " tokens, "
       << to_string(t.draft.stop_reason) << ")\n";
    os << "kappa_a   : " << (t.kappa_a ? fixed(*t.kappa_a) : std::string("n/a"));
    if (t.kappa_span) {
      os << "  over [" << t.kappa_span->begin << ", " << t.kappa_span->end << ")";
      if (t.span_fallback) os << " (span not found, whole draft)";
    }
    os << '\n';
    os << "decision  : " << to_string(t.decision) << '\n';
  }
  if (!t.chunks.empty()) {
    os << "chunks    : size " << t.chunk_size << '\n';
    for (const auto& c : t.chunks) {
      const auto toks = tokens_of(c.segment.records);
      os << "  [" << c.segment.chunk_index << "] m=" << c.visibility
         << " kappa_r=" << (c.kappa_r ? fixed(*c.kappa_r) : std::string("n/a")) << "  "
         << render_tokens(toks, pieces) << '\n';
    }
    os << "final m   : " << t.final_visibility << '\n';
  }
  const auto answer = tokens_of(t.answer_records());
  os << "answer    : " << render_tokens(answer, pieces) << '\n';
  os << "tokens    : draft " << t.counts.draft_tokens << ", think " << t.counts.think_tokens
     << ", total " << t.counts.total << '\n';
  return os.str();
}

}  // namespace draftgate
