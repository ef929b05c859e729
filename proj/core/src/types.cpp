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

#include "draftgate/types.h"

#include <cmath>
#include <string>

#include "draftgate/errors.h"

namespace draftgate {

bool validate_prob_vector(std::span<const double> v) {
  if (v.empty()) return false;
  double sum = 0.0;
  for (double x : v) {
    if (!std::isfinite(x) || x < 0.0) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= kProbTolerance;
}

std::vector<PrefixItem> discrete_items(std::span<const TokenId> tokens) {
  std::vector<PrefixItem> items;
  items.reserve(tokens.size());
  for (TokenId t : tokens) items.emplace_back(Discrete{t});
  return items;
}

StepRecord make_step_record(TokenId token, double chosen_prob, EmbeddingVector embedding,
                            std::string handle) {
  if (!(chosen_prob > 0.0 && chosen_prob <= 1.0)) {
    throw InvalidArgument("chosen probability must lie in (0, 1], got " +
                          std::to_string(chosen_prob));
  }
  return StepRecord{token, chosen_prob, std::log(chosen_prob), std::move(embedding),
                    std::move(handle)};
}

std::vector<TokenId> tokens_of(std::span<const StepRecord> records) {
  std::vector<TokenId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.token);
  return out;
}

void validate_sampling_params(const SamplingParams& p) {
  if (!(p.temperature > 0.0) || !std::isfinite(p.temperature)) {
    throw InvalidArgument("temperature must be positive");
  }
  if (p.top_k < 0) throw InvalidArgument("top_k must be non-negative");
  if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw InvalidArgument("top_p must lie in (0, 1]");
  if (!(p.min_p >= 0.0 && p.min_p < 1.0)) throw InvalidArgument("min_p must lie in [0, 1)");
}

void validate_session_config(const SessionConfig& c) {
  if (c.max_draft_len < 1) throw InvalidArgument("max_draft_len must be at least 1");
  if (c.max_think_budget < 1) throw InvalidArgument("max_think_budget must be at least 1");
  if (c.max_final_len < 1) throw InvalidArgument("max_final_len must be at least 1");
  if (c.chunk_policy.kind == ChunkPolicy::Kind::kFixed && c.chunk_policy.fixed_size < 1) {
    throw InvalidArgument("fixed chunk size must be at least 1");
  }
  if (!std::isfinite(c.tau_a) || !std::isfinite(c.tau_r)) {
    throw InvalidArgument("thresholds must be finite");
  }
  if (c.granularity.kind == Granularity::Kind::kAnswerSpan &&
      (c.granularity.pattern.open.empty() || c.granularity.pattern.close.empty())) {
    throw InvalidArgument("answer-span delimiters must be non-empty");
  }
  validate_sampling_params(c.sampling);
}

void validate_template(const Template& t) {
  if (t.think_open.empty() || t.think_close.empty()) {
    throw InvalidArgument("think markers must be non-empty");
  }
  if (t.think_open == t.think_close) throw InvalidArgument("think markers must differ");
  if (t.end_tokens.empty()) throw InvalidArgument("template needs at least one end token");
}

TokenCounts compute_counts(const Transcript& t) {
  TokenCounts c;
  c.draft_tokens = t.draft.records.size();
  for (const auto& chunk : t.chunks) c.think_tokens += chunk.segment.records.size();
  c.total = c.draft_tokens + c.think_tokens + t.final_answer.records.size();
  return c;
}

TokenCounts transcript_counts(const Transcript& t) {
  const bool draft_expected =
      t.mode == SessionMode::kCopt && t.status != SessionStatus::kEmptyDraft;
  if (draft_expected && t.draft.records.empty()) {
    throw CorruptTranscript("transcript has an empty draft but is not marked empty_draft");
  }
  if (t.decision == Decision::kAccepted && !t.chunks.empty()) {
    throw CorruptTranscript("accepted transcript carries thinking chunks");
  }
  for (std::size_t k = 0; k < t.chunks.size(); ++k) {
    if (t.chunks[k].segment.chunk_index != static_cast<int>(k) + 1) {
      throw CorruptTranscript("thinking chunk indices are not contiguous from 1");
    }
  }
  TokenCounts c = compute_counts(t);
  if (c != t.counts) {
    throw CorruptTranscript("stored token counts {" + std::to_string(t.counts.draft_tokens) +
                            ", " + std::to_string(t.counts.think_tokens) + ", " +
                            std::to_string(t.counts.total) + "} disagree with segments {" +
                            std::to_string(c.draft_tokens) + ", " +
                            std::to_string(c.think_tokens) + ", " + std::to_string(c.total) +
                            "}");
  }
  return c;
}

const char* to_string(Decision d) {
  return d == Decision::kAccepted ? "accepted" : "think_triggered";
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kNone:
      return "none";
    case StopReason::kStopToken:
      return "stop_token";
    case StopReason::kEos:
      return "eos";
    case StopReason::kBudget:
      return "budget";
    case StopReason::kError:
      return "error";
  }
  return "none";
}

const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kComplete:
      return "complete";
    case SessionStatus::kTruncated:
      return "truncated";
    case SessionStatus::kEmptyDraft:
      return "empty_draft";
  }
  return "complete";
}

const char* to_string(SessionMode m) { return m == SessionMode::kCopt ? "copt" : "cot"; }

}  // namespace draftgate
