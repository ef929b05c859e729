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

// Value types shared by every part of the decoding controller.
//
// All logarithms are natural; reliability scores are reported in nats.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace draftgate {

using TokenId = std::int32_t;

// Next-token distribution over the whole vocabulary.
using ProbVector = std::vector<double>;

// A row of the input embedding matrix, or a probability-weighted mix of rows.
using EmbeddingVector = std::vector<double>;

inline constexpr double kProbTolerance = 1e-6;

// True iff every entry is non-negative and finite and the entries sum to 1
// within kProbTolerance.
bool validate_prob_vector(std::span<const double> v);

// Context item: a committed token or a continuous embedding.
struct Discrete {
  TokenId token = 0;
  bool operator==(const Discrete&) const = default;
};

struct Continuous {
  EmbeddingVector embedding;
  bool operator==(const Continuous&) const = default;
};

using PrefixItem = std::variant<Discrete, Continuous>;

std::vector<PrefixItem> discrete_items(std::span<const TokenId> tokens);

// One generated step: the sampled token, its probability under the decoding
// distribution, and the mixture embedding of that distribution.
//
// Remote backends may leave `embedding` empty and reference the server-side
// vector through `embedding_handle` instead.
struct StepRecord {
  TokenId token = 0;
  double chosen_prob = 1.0;
  double chosen_logprob = 0.0;
  EmbeddingVector embedding;
  std::string embedding_handle;

  bool operator==(const StepRecord&) const = default;
};

// Builds a record with chosen_logprob = log(chosen_prob).
StepRecord make_step_record(TokenId token, double chosen_prob, EmbeddingVector embedding,
                            std::string handle = {});

std::vector<TokenId> tokens_of(std::span<const StepRecord> records);

enum class SegmentRole { kQuestion, kDraftAnswer, kThinkChunk, kFinalAnswer };

enum class StopReason { kNone, kStopToken, kEos, kBudget, kError };

struct Segment {
  SegmentRole role = SegmentRole::kDraftAnswer;
  // 1-based, only meaningful for kThinkChunk.
  int chunk_index = 0;
  // Raw prompt tokens; populated for kQuestion only.
  std::vector<TokenId> tokens;
  std::vector<StepRecord> records;
  StopReason stop_reason = StopReason::kNone;

  std::size_t size() const {
    return role == SegmentRole::kQuestion ? tokens.size() : records.size();
  }
  bool operator==(const Segment&) const = default;
};

struct SamplingParams {
  double temperature = 0.6;
  // 0 disables top-k.
  int top_k = 20;
  double top_p = 0.95;
  double min_p = 0.0;
  std::uint64_t seed = 0;
  // Argmax decoding; the temperature still shapes p_t and e_t.
  bool greedy = false;

  bool operator==(const SamplingParams&) const = default;
};

void validate_sampling_params(const SamplingParams& params);

struct ChunkPolicy {
  enum class Kind { kDefaultRule, kFixed };
  Kind kind = Kind::kDefaultRule;
  int fixed_size = 0;

  static ChunkPolicy default_rule() { return {}; }
  static ChunkPolicy fixed(int size) { return {Kind::kFixed, size}; }
  bool operator==(const ChunkPolicy&) const = default;
};

// Delimiters around the answer span, e.g. {"\\boxed{", "}"}.
struct SpanPattern {
  std::string open = "\\boxed{";
  std::string close = "}";
  bool operator==(const SpanPattern&) const = default;
};

struct Granularity {
  enum class Kind { kWholeDraft, kAnswerSpan };
  Kind kind = Kind::kWholeDraft;
  SpanPattern pattern;

  static Granularity whole_draft() { return {}; }
  static Granularity answer_span(SpanPattern p = {}) { return {Kind::kAnswerSpan, std::move(p)}; }
  bool operator==(const Granularity&) const = default;
};

struct SessionConfig {
  double tau_a = 0.3;
  double tau_r = 0.0;
  int max_draft_len = 1024;
  int max_think_budget = 32768;
  int max_final_len = 1024;
  ChunkPolicy chunk_policy;
  SamplingParams sampling;
  Granularity granularity;
  bool first_chunk_visible = false;

  bool operator==(const SessionConfig&) const = default;
};

void validate_session_config(const SessionConfig& config);

// Chat-template tokens. The think markers are injected, never sampled, and
// never scored or counted.
struct Template {
  std::vector<TokenId> prompt_prefix;
  std::vector<TokenId> prompt_suffix;
  std::vector<TokenId> think_open;
  std::vector<TokenId> think_close;
  // Any one of these ends a draft or a final answer.
  std::vector<TokenId> end_tokens;

  bool operator==(const Template&) const = default;
};

// think_open/think_close non-empty and distinct; at least one end token.
void validate_template(const Template& t);

enum class Decision { kAccepted, kThinkTriggered };

enum class SessionMode { kCopt, kCot };

enum class SessionStatus { kComplete, kTruncated, kEmptyDraft };

struct ChunkRecord {
  Segment segment;
  // Absent only for plain chain-of-thought sessions, which never score chunks.
  std::optional<double> kappa_r;
  // Visibility bit m_k the chunk was generated under.
  int visibility = 0;

  bool operator==(const ChunkRecord&) const = default;
};

struct TokenCounts {
  std::size_t draft_tokens = 0;
  std::size_t think_tokens = 0;
  std::size_t total = 0;
  bool operator==(const TokenCounts&) const = default;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

struct Transcript {
  SessionMode mode = SessionMode::kCopt;
  SessionStatus status = SessionStatus::kComplete;
  std::vector<TokenId> question;
  Segment draft{SegmentRole::kDraftAnswer, 0, {}, {}, StopReason::kNone};
  bool draft_truncated = false;
  // Absent when the draft is empty or the session skipped the draft stage.
  std::optional<double> kappa_a;
  // Draft positions the score was computed over.
  std::optional<IndexRange> kappa_span;
  // Answer-span mode found no delimiter and scored the whole draft.
  bool span_fallback = false;
  Decision decision = Decision::kAccepted;
  int chunk_size = 0;
  std::vector<ChunkRecord> chunks;
  // Visibility used while producing the final answer.
  int final_visibility = 0;
  // Empty when the draft was accepted; the draft is then the answer.
  Segment final_answer{SegmentRole::kFinalAnswer, 0, {}, {}, StopReason::kNone};
  TokenCounts counts;

  // Records that constitute the delivered answer.
  const std::vector<StepRecord>& answer_records() const {
    return decision == Decision::kAccepted ? draft.records : final_answer.records;
  }
  bool operator==(const Transcript&) const = default;
};

// Recomputes token accounting from the segments and checks it against the
// stored counts. Throws CorruptTranscript on disagreement or on an empty draft
// in a session that claims to have produced one.
TokenCounts transcript_counts(const Transcript& t);

// Counts derived from segments only; no consistency check.
TokenCounts compute_counts(const Transcript& t);

const char* to_string(Decision d);
const char* to_string(StopReason r);
const char* to_string(SessionStatus s);
const char* to_string(SessionMode m);

}  // namespace draftgate
