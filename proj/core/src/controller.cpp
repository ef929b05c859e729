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

#include "draftgate/controller.h"

#include <algorithm>
#include <string>

#include "draftgate/errors.h"

namespace draftgate {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::kDrafting:
      return "drafting";
    case Phase::kGating:
      return "gating";
    case Phase::kThinking:
      return "thinking";
    case Phase::kFinalizing:
      return "finalizing";
    case Phase::kDone:
      return "done";
  }
  return "done";
}

bool SessionMachine::legal(Phase from, Phase to) {
  switch (from) {
    case Phase::kDrafting:
      return to == Phase::kGating;
    case Phase::kGating:
      return to == Phase::kDone || to == Phase::kThinking;
    case Phase::kThinking:
      return to == Phase::kThinking || to == Phase::kFinalizing;
    case Phase::kFinalizing:
      return to == Phase::kDone;
    case Phase::kDone:
      return false;
  }
  return false;
}

void SessionMachine::advance(Phase next) {
  if (!legal(phase_, next)) {
    throw InvalidArgument(std::string("illegal phase transition ") + to_string(phase_) + " -> " +
                          to_string(next));
  }
  chunk_ = next == Phase::kThinking ? chunk_ + 1 : chunk_;
  phase_ = next;
}

namespace {

void append(std::vector<PrefixItem>& items, std::span<const TokenId> tokens) {
  for (TokenId t : tokens) items.emplace_back(Discrete{t});
}

bool ends_with(std::span<const StepRecord> records, std::span<const TokenId> seq) {
  if (seq.empty() || records.size() < seq.size()) return false;
  const std::size_t off = records.size() - seq.size();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (records[off + i].token != seq[i]) return false;
  }
  return true;
}

Segment make_segment(SegmentRole role, SegmentResult&& result, int chunk_index = 0) {
  Segment s;
  s.role = role;
  s.chunk_index = chunk_index;
  s.records = std::move(result.records);
  s.stop_reason = result.stop_reason;
  return s;
}

void raise_on_error(const SegmentResult& r, const char* stage) {
  if (r.stop_reason == StopReason::kError) {
    throw BackendError(std::string("backend failed during ") + stage + ": " + r.error);
  }
}

void check_inputs(std::span<const TokenId> question, const SessionConfig& config,
                  const Template& tmpl) {
  if (question.empty()) throw InvalidArgument("question must be non-empty");
  validate_session_config(config);
  validate_template(tmpl);
}

// Score range within the draft, per the configured granularity.
SpanMatch score_range(const Backend& backend, std::span<const StepRecord> draft,
                      const Granularity& granularity) {
  const IndexRange whole{0, draft.size()};
  if (granularity.kind == Granularity::Kind::kWholeDraft) return {whole, true};
  std::vector<std::string> pieces;
  pieces.reserve(draft.size());
  for (const auto& r : draft) {
    auto piece = backend.token_piece(r.token);
    if (!piece) return {whole, false};
    pieces.push_back(std::move(*piece));
  }
  return answer_span(pieces, granularity.pattern);
}

double score(std::span<const StepRecord> records, const TeacherScores& teacher, IndexRange range) {
  return kappa_hat(records.subspan(range.begin, range.size()),
                   std::span<const double>(teacher.probs).subspan(range.begin, range.size()));
}

// Chunked thinking followed by the final answer. Fills chunks, status,
// final_visibility and final_answer.
void think_and_answer(const Backend& backend, SessionContext& session, const SessionConfig& config,
                      const Template& tmpl, SessionMachine& machine, Transcript& t) {
  const auto draft_tokens = tokens_of(t.draft.records);
  const std::span<const TokenId> draft(draft_tokens);
  const double temperature = config.sampling.temperature;

  int visible = config.first_chunk_visible ? 1 : 0;
  std::vector<TokenId> thinking;
  int remaining = config.max_think_budget;
  bool closed = false;

  for (int k = 1; !closed && remaining > 0; ++k) {
    machine.advance(Phase::kThinking);
    const auto context = build_context(t.question, draft, visible, thinking, tmpl);
    GenerationLimits limits{{tmpl.think_close}, tmpl.end_tokens,
                            std::min(t.chunk_size, remaining)};
    SegmentResult chunk = generate_segment(backend, session, context, limits, config.sampling);
    raise_on_error(chunk, "thinking");
    closed = chunk.stop_reason == StopReason::kStopToken || chunk.stop_reason == StopReason::kEos;
    if (chunk.records.empty()) break;

    const TeacherScores teacher = backend.teacher_probs(session, context, chunk.records, temperature);
    const double kappa_r = kappa_hat(chunk.records, teacher);
    const auto chunk_tokens = tokens_of(chunk.records);
    thinking.insert(thinking.end(), chunk_tokens.begin(), chunk_tokens.end());
    remaining -= static_cast<int>(chunk_tokens.size());
    t.chunks.push_back(
        ChunkRecord{make_segment(SegmentRole::kThinkChunk, std::move(chunk), k), kappa_r, visible});
    visible = visibility_update(kappa_r, config.tau_r);
  }
  if (!closed) t.status = SessionStatus::kTruncated;
  t.final_visibility = visible;

  machine.advance(Phase::kFinalizing);
  auto context = build_context(t.question, draft, visible, thinking, tmpl);
  append(context, tmpl.think_close);
  SegmentResult answer = generate_segment(backend, session, std::move(context),
                                          {{}, tmpl.end_tokens, config.max_final_len},
                                          config.sampling);
  raise_on_error(answer, "final answer");
  t.final_answer = make_segment(SegmentRole::kFinalAnswer, std::move(answer));
  machine.advance(Phase::kDone);
}

}  // namespace

std::vector<PrefixItem> question_context(std::span<const TokenId> question, const Template& tmpl) {
  std::vector<PrefixItem> items;
  items.reserve(tmpl.prompt_prefix.size() + question.size() + tmpl.prompt_suffix.size());
  append(items, tmpl.prompt_prefix);
  append(items, question);
  append(items, tmpl.prompt_suffix);
  return items;
}

std::vector<PrefixItem> draft_context(std::span<const TokenId> question, const Template& tmpl) {
  auto items = question_context(question, tmpl);
  append(items, tmpl.think_open);
  append(items, tmpl.think_close);
  return items;
}

std::vector<PrefixItem> build_context(std::span<const TokenId> question,
                                      std::optional<std::span<const TokenId>> draft, int visible,
                                      std::span<const TokenId> think_so_far, const Template& tmpl) {
  if (visible != 0 && !draft) throw InvalidArgument("draft marked visible but none exists");
  auto items = question_context(question, tmpl);
  if (visible != 0) append(items, *draft);
  append(items, tmpl.think_open);
  append(items, think_so_far);
  return items;
}

SegmentResult generate_segment(const Backend& backend, SessionContext& session,
                               std::vector<PrefixItem> context, const GenerationLimits& limits,
                               const SamplingParams& sampling) {
  if (limits.budget < 1) throw InvalidArgument("generation budget must be at least 1");
  SegmentResult out;
  while (static_cast<int>(out.records.size()) < limits.budget) {
    StepRecord rec;
    try {
      rec = backend.step(session, context, sampling);
    } catch (const Error& e) {
      out.stop_reason = StopReason::kError;
      out.error = e.what();
      return out;
    }
    if (std::find(limits.end_tokens.begin(), limits.end_tokens.end(), rec.token) !=
        limits.end_tokens.end()) {
      out.stop_reason = StopReason::kEos;
      return out;
    }
    context.emplace_back(Discrete{rec.token});
    out.records.push_back(std::move(rec));
    for (const auto& stop : limits.stop_sequences) {
      if (ends_with(out.records, stop)) {
        out.records.resize(out.records.size() - stop.size());
        out.stop_reason = StopReason::kStopToken;
        return out;
      }
    }
  }
  out.stop_reason = StopReason::kBudget;
  return out;
}

Transcript run_session(const Backend& backend, std::span<const TokenId> question,
                       const SessionConfig& config, const Template& tmpl,
                       SessionContext& session) {
  check_inputs(question, config, tmpl);
  SessionMachine machine;
  Transcript t;
  t.mode = SessionMode::kCopt;
  t.question.assign(question.begin(), question.end());

  const auto context = draft_context(question, tmpl);
  SegmentResult draft = generate_segment(backend, session, context,
                                         {{}, tmpl.end_tokens, config.max_draft_len},
                                         config.sampling);
  raise_on_error(draft, "draft");
  t.draft_truncated = draft.stop_reason == StopReason::kBudget;
  t.draft = make_segment(SegmentRole::kDraftAnswer, std::move(draft));

  machine.advance(Phase::kGating);
  const std::size_t draft_len = t.draft.records.size();
  if (draft_len == 0) {
    // No score is defined for an empty draft; thinking is the safe branch.
    t.status = SessionStatus::kEmptyDraft;
    t.decision = Decision::kThinkTriggered;
    t.chunk_size = 1;
  } else {
    const TeacherScores teacher =
        backend.teacher_probs(session, context, t.draft.records, config.sampling.temperature);
    const SpanMatch span = score_range(backend, t.draft.records, config.granularity);
    t.kappa_span = span.range;
    t.span_fallback = config.granularity.kind == Granularity::Kind::kAnswerSpan && !span.found;
    t.kappa_a = score(t.draft.records, teacher, span.range);
    t.decision = draft_decision(*t.kappa_a, config.tau_a);
    t.chunk_size = chunk_layout(static_cast<int>(draft_len), config.chunk_policy).chunk_size;
  }

  if (t.decision == Decision::kAccepted) {
    t.chunk_size = 0;
    machine.advance(Phase::kDone);
  } else {
    think_and_answer(backend, session, config, tmpl, machine, t);
  }
  t.counts = compute_counts(t);
  backend.end_session(session);
  return t;
}

Transcript run_cot_session(const Backend& backend, std::span<const TokenId> question,
                           const SessionConfig& config, const Template& tmpl,
                           SessionContext& session) {
  check_inputs(question, config, tmpl);
  Transcript t;
  t.mode = SessionMode::kCot;
  t.decision = Decision::kThinkTriggered;
  t.question.assign(question.begin(), question.end());

  auto context = build_context(question, std::nullopt, 0, {}, tmpl);
  SegmentResult thinking = generate_segment(
      backend, session, context, {{tmpl.think_close}, tmpl.end_tokens, config.max_think_budget},
      config.sampling);
  raise_on_error(thinking, "thinking");
  if (thinking.stop_reason == StopReason::kBudget) t.status = SessionStatus::kTruncated;
  const auto thought = tokens_of(thinking.records);
  if (!thinking.records.empty()) {
    t.chunks.push_back(ChunkRecord{make_segment(SegmentRole::kThinkChunk, std::move(thinking), 1),
                                   std::nullopt, 0});
  }

  context = build_context(question, std::nullopt, 0, thought, tmpl);
  append(context, tmpl.think_close);
  SegmentResult answer = generate_segment(backend, session, std::move(context),
                                          {{}, tmpl.end_tokens, config.max_final_len},
                                          config.sampling);
  raise_on_error(answer, "final answer");
  t.final_answer = make_segment(SegmentRole::kFinalAnswer, std::move(answer));
  t.counts = compute_counts(t);
  backend.end_session(session);
  return t;
}

bool ReplayReport::all_exact() const {
  return visibility_consistent &&
         std::all_of(kappas.begin(), kappas.end(), [](const KappaCheck& c) { return c.exact(); });
}

bool visibility_rule_holds(const Transcript& t, const SessionConfig& config) {
  if (t.mode != SessionMode::kCopt || t.chunks.empty()) return true;
  int expected = config.first_chunk_visible ? 1 : 0;
  for (const auto& c : t.chunks) {
    if (c.visibility != expected || !c.kappa_r) return false;
    expected = visibility_update(*c.kappa_r, config.tau_r);
  }
  return t.final_visibility == expected;
}

ReplayReport replay_transcript(const Backend& backend, const Transcript& t,
                               const SessionConfig& config, const Template& tmpl,
                               SessionContext& session) {
  ReplayReport report;
  const double temperature = config.sampling.temperature;
  if (t.kappa_a) {
    const auto context = draft_context(t.question, tmpl);
    const TeacherScores teacher =
        backend.teacher_probs(session, context, t.draft.records, temperature);
    const IndexRange range = t.kappa_span.value_or(IndexRange{0, t.draft.records.size()});
    report.kappas.push_back({"kappa_a", *t.kappa_a, score(t.draft.records, teacher, range)});
  }
  const auto draft_tokens = tokens_of(t.draft.records);
  std::vector<TokenId> thinking;
  for (const auto& c : t.chunks) {
    if (c.kappa_r) {
      const auto context =
          build_context(t.question, std::span<const TokenId>(draft_tokens), c.visibility,
                        thinking, tmpl);
      const TeacherScores teacher =
          backend.teacher_probs(session, context, c.segment.records, temperature);
      report.kappas.push_back({"kappa_r[" + std::to_string(c.segment.chunk_index) + "]",
                               *c.kappa_r, kappa_hat(c.segment.records, teacher)});
    }
    const auto toks = tokens_of(c.segment.records);
    thinking.insert(thinking.end(), toks.begin(), toks.end());
  }
  report.visibility_consistent = visibility_rule_holds(t, config);
  return report;
}

}  // namespace draftgate
