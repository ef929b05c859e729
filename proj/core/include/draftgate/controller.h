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

// Draft-then-think session controller.
//
// A session first forces an empty think block and lets the model answer
// directly, caching (p_t, e_t) for every draft token. The draft is scored
// with a single teacher pass; a score above tau_a triggers chunked thinking.
// Each thinking chunk is generated with the draft shown or hidden according
// to the visibility bit, scored on completion, and the score decides the bit
// for the next chunk. The final answer follows the closed think block.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "draftgate/backend.h"
#include "draftgate/estimators.h"
#include "draftgate/types.h"

namespace draftgate {

enum class Phase { kDrafting, kGating, kThinking, kFinalizing, kDone };

const char* to_string(Phase p);

// Tracks the session phase and rejects illegal transitions:
// Drafting -> Gating -> {Done, Thinking}; Thinking -> {Thinking, Finalizing};
// Finalizing -> Done.
class SessionMachine {
 public:
  Phase phase() const { return phase_; }
  // 1-based index of the current chunk while thinking.
  int chunk() const { return chunk_; }
  void advance(Phase next);

  static bool legal(Phase from, Phase to);

 private:
  Phase phase_ = Phase::kDrafting;
  int chunk_ = 0;
};

// Prompt part of every context: prompt_prefix, question, prompt_suffix.
std::vector<PrefixItem> question_context(std::span<const TokenId> question, const Template& tmpl);

// Draft-stage context: question, then a forced empty think block.
std::vector<PrefixItem> draft_context(std::span<const TokenId> question, const Template& tmpl);

// Thinking-stage context: question; the full draft when `visible`; think_open;
// every thinking token generated so far. Throws InvalidArgument when visible
// is set without a draft.
std::vector<PrefixItem> build_context(std::span<const TokenId> question,
                                      std::optional<std::span<const TokenId>> draft, int visible,
                                      std::span<const TokenId> think_so_far, const Template& tmpl);

struct GenerationLimits {
  // Multi-token sequences ending the segment with kStopToken; stripped.
  std::vector<std::vector<TokenId>> stop_sequences;
  // Single tokens ending the segment with kEos; not recorded.
  std::vector<TokenId> end_tokens;
  int budget = 1;
};

struct SegmentResult {
  std::vector<StepRecord> records;
  StopReason stop_reason = StopReason::kNone;
  // Backend failure message when stop_reason == kError.
  std::string error;
};

// Samples up to `limits.budget` steps, caching p_t and e_t of the
// temperature-adjusted distribution at each. A backend failure mid-stream
// returns the records produced so far with kError.
SegmentResult generate_segment(const Backend& backend, SessionContext& session,
                               std::vector<PrefixItem> context, const GenerationLimits& limits,
                               const SamplingParams& sampling);

// Runs a full draft -> gate -> (think) -> answer session. The session's rng
// is consumed; pass a fresh SessionContext seeded per session.
Transcript run_session(const Backend& backend, std::span<const TokenId> question,
                       const SessionConfig& config, const Template& tmpl,
                       SessionContext& session);

// Standard chain-of-thought session: think first, then answer. No draft, no
// scores, no gate.
Transcript run_cot_session(const Backend& backend, std::span<const TokenId> question,
                           const SessionConfig& config, const Template& tmpl,
                           SessionContext& session);

struct KappaCheck {
  std::string name;  // "kappa_a" or "kappa_r[k]"
  double stored = 0.0;
  double recomputed = 0.0;
  bool exact() const { return stored == recomputed; }
};

struct ReplayReport {
  std::vector<KappaCheck> kappas;
  // m_1 matches the config and m_{k+1} = [kappa_r^(k) < tau_r] throughout.
  bool visibility_consistent = true;
  bool all_exact() const;
};

// Rebuilds each scoring context from the transcript alone and recomputes
// every stored score from its records.
ReplayReport replay_transcript(const Backend& backend, const Transcript& t,
                               const SessionConfig& config, const Template& tmpl,
                               SessionContext& session);

// Checks the visibility sequence against the update rule without a backend.
bool visibility_rule_holds(const Transcript& t, const SessionConfig& config);

}  // namespace draftgate
