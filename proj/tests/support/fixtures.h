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


// Scripted sessions with hand-checkable scores, shared by the unit and
// acceptance tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "draftgate/harness.h"
#include "draftgate/scripted.h"

namespace fixtures {

namespace ds = draftgate::scripted;
using draftgate::TokenId;

inline const std::vector<std::string> kPieces = {"\\boxed{", "}", "0", "1", "2", "3", "4",
                                                 "5",        "6", "7", "8", "9", "a", "b"};

// Id of a piece of kPieces.
inline TokenId id(const std::string& piece) {
  for (std::size_t i = 0; i < kPieces.size(); ++i) {
    if (kPieces[i] == piece) return static_cast<TokenId>(ds::kFirstPiece + i);
  }
  throw std::invalid_argument(piece);
}

inline TokenId digit(int d) { return id(std::to_string(d)); }

inline int vocab() { return static_cast<int>(kPieces.size()) + ds::kFirstPiece; }

// Deterministic decoding at temperature 1 so planned probabilities are the
// decoding probabilities.
inline draftgate::SessionConfig exact_config() {
  draftgate::SessionConfig c;
  c.sampling.temperature = 1.0;
  c.sampling.greedy = true;
  return c;
}

inline std::unique_ptr<ds::ScriptedBackend> scripted(std::function<ds::ScriptPlan(TokenId)> plan) {
  return std::make_unique<ds::ScriptedBackend>(kPieces, ds::plan_script(std::move(plan), vocab()));
}

// Every planned step certain: the draft "\boxed{42}" is accepted with score 0.
inline ds::ScriptPlan one_hot_plan(TokenId) {
  ds::ScriptPlan p;
  p.draft = {{id("\\boxed{")}, {digit(4)}, {digit(2)}, {id("}")}};
  return p;
}

// Ten-token uncertain draft, then three two-token thinking chunks whose
// second positions give chunk scores 0.5, -0.2 and 0.5 (position one of each
// chunk scores 0 because its teacher prefix holds no soft items).
inline ds::ScriptPlan visibility_plan(TokenId) {
  ds::ScriptPlan p;
  for (int i = 0; i < 10; ++i) p.draft.push_back({digit(i % 10), 0.9, 0.3});
  const double e = std::exp(1.0);
  const double e04 = std::exp(0.4);
  p.thinking = {{id("a"), 0.9, 0.9}, {id("b"), 0.9, 0.9 / e},   // log ratio 1
                {id("a"), 0.9, 0.9}, {id("b"), 0.5, 0.5 * e04},  // log ratio -0.4
                {id("a"), 0.9, 0.9}, {id("b"), 0.9, 0.9 / e}};   // log ratio 1
  p.answer = {{id("\\boxed{")}, {digit(4)}, {id("}")}};
  return p;
}

// Ten single-digit questions. Question d drafts "\boxed{D}"; a soft
// probability of 0.2 on the closing brace gives kappa_a = ln(5) / 3 and
// triggers thinking at tau_a = 0.3, otherwise kappa_a = 0. Thinking is one
// token, then the final answer "\boxed{F}".
struct LabelledTask {
  int question;
  int draft;
  bool flagged;
  int final_digit;  // ignored when accepted
  int expected;
};

//  q  draft  flagged  final  expected   outcome
inline const std::vector<LabelledTask> kLabelled = {
    {0, 0, false, 0, 0},  // accepted, right
    {1, 1, false, 1, 1},  // accepted, right
    {2, 5, false, 5, 2},  // accepted, wrong
    {3, 3, false, 3, 3},  // accepted, right
    {4, 7, true, 4, 4},   // caught and corrected
    {5, 8, true, 5, 5},   // caught and corrected
    {6, 9, true, 1, 6},   // caught, still wrong
    {7, 7, true, 7, 7},   // flagged needlessly, right
    {8, 8, true, 2, 8},   // flagged needlessly, broken by thinking
    {9, 9, false, 9, 9},  // accepted, right
};

inline ds::ScriptPlan labelled_plan(TokenId first) {
  const auto& task = kLabelled.at(static_cast<std::size_t>(first - digit(0)));
  ds::ScriptPlan p;
  p.draft = {{id("\\boxed{")}, {digit(task.draft), 0.9, 0.9}, {id("}"), 1.0, task.flagged ? 0.2 : 1.0}};
  p.thinking = {{id("a")}};
  p.answer = {{id("\\boxed{")}, {digit(task.final_digit)}, {id("}")}};
  return p;
}

inline std::vector<draftgate::harness::TaskRecord> labelled_tasks() {
  std::vector<draftgate::harness::TaskRecord> out;
  for (const auto& t : kLabelled) {
    draftgate::harness::TaskRecord r;
    r.id = "q" + std::to_string(t.question);
    r.prompt_tokens = std::vector<TokenId>{digit(t.question)};
    r.expected = std::to_string(t.expected);
    r.checker = draftgate::harness::CheckerKind::kBoxed;
    out.push_back(std::move(r));
  }
  return out;
}

// Stochastic script for gate experiments: distributions come from a hash of
// the two question tokens and the prefix length; soft items sharpen the
// logits by a question-dependent factor, so draft scores spread out.
inline draftgate::ProbVector hashed_distribution(const ds::ScriptView& view) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint64_t x : {static_cast<std::uint64_t>(view.tokens.front()),
                          static_cast<std::uint64_t>(view.tokens.size() > 1 ? view.tokens[1] : 0),
                          static_cast<std::uint64_t>(view.tokens.size())}) {
    h ^= x + 1;
    h *= 1099511628211ULL;
  }
  draftgate::Rng rng(h);
  const int n = vocab();
  const double sharpen =
      view.soft_items > 0 ? 1.0 + 0.25 * static_cast<double>(view.tokens.front() % 11) : 1.0;
  draftgate::ProbVector p(static_cast<std::size_t>(n), 0.0);
  double z = 0.0;
  for (int v = ds::kFirstPiece; v < n; ++v) {
    p[static_cast<std::size_t>(v)] = std::exp(sharpen * 3.0 * rng.uniform());
    z += p[static_cast<std::size_t>(v)];
  }
  const double stop = 0.12;
  for (int v = ds::kFirstPiece; v < n; ++v) p[static_cast<std::size_t>(v)] *= (1.0 - 2 * stop) / z;
  p[ds::kEos] = stop;
  p[ds::kThinkClose] = stop;
  return p;
}

inline std::unique_ptr<ds::ScriptedBackend> hashed_backend() {
  return std::make_unique<ds::ScriptedBackend>(kPieces, hashed_distribution);
}

inline draftgate::SessionConfig hashed_config() {
  draftgate::SessionConfig c;
  c.max_draft_len = 8;
  c.max_think_budget = 12;
  c.max_final_len = 6;
  return c;
}

// Fifty two-token questions.
inline std::vector<std::vector<TokenId>> hashed_questions() {
  std::vector<std::vector<TokenId>> out;
  for (int i = 0; i < 50; ++i) out.push_back({digit(i % 10), digit((i / 10) % 10)});
  return out;
}

}  // namespace fixtures
