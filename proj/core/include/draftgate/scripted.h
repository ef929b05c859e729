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

// Backend whose distributions come from a caller-supplied script. Used to
// drive the session controller through exact, hand-checkable traces.
//
// Token ids 0, 1, 2 are <eos>, <think>, </think>; caller pieces follow from
// id 3. Embeddings are one-hot in dimension |V|, so a mixture embedding is
// the distribution itself. A continuous item that is exactly one-hot is read
// as its token; any other continuous item is "soft" and is read as its argmax.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "draftgate/backend.h"

namespace draftgate::scripted {

inline constexpr TokenId kEos = 0;
inline constexpr TokenId kThinkOpen = 1;
inline constexpr TokenId kThinkClose = 2;
inline constexpr TokenId kFirstPiece = 3;

struct ScriptView {
  // Prefix tokens, soft items decoded to their argmax.
  std::vector<TokenId> tokens;
  std::size_t soft_items = 0;
};

using ScriptFn = std::function<ProbVector(const ScriptView&)>;

class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(std::vector<std::string> pieces, ScriptFn script);

  BackendInfo info() const override;
  EmbeddingVector token_embedding(TokenId v) const override;
  ProbVector next_distribution(std::span<const PrefixItem> prefix) const override;
  std::optional<std::string> token_piece(TokenId v) const override;
  // Greedy longest-piece match; nullopt if some text cannot be covered.
  std::optional<std::vector<TokenId>> tokenize(std::string_view text) const override;
  std::optional<Template> default_template() const override;

  // Id of a caller piece; throws InvalidArgument if unknown.
  TokenId token(std::string_view piece) const;
  int vocab_size() const { return static_cast<int>(pieces_.size()); }

 private:
  std::vector<std::string> pieces_;  // including the three specials
  ScriptFn script_;
};

// One planned step: `token` gets `prob` under a discrete prefix and
// `soft_prob` once any soft item is present. The remaining mass is spread
// evenly over the other caller pieces.
struct PlannedStep {
  TokenId token = kFirstPiece;
  double prob = 1.0;
  double soft_prob = 1.0;
};

// Per-question plan. After each list runs out the script emits its
// terminator: <eos> for the draft and final answer, </think> for thinking.
struct ScriptPlan {
  std::vector<PlannedStep> draft;
  std::vector<PlannedStep> thinking;
  std::vector<PlannedStep> answer;
};

// Script following the session layouts the controller builds (empty think
// block then draft; question, optional draft, <think>, thinking; then
// </think> and the answer). `planner` receives the first prompt token.
ScriptFn plan_script(std::function<ScriptPlan(TokenId)> planner, int vocab_size);

}  // namespace draftgate::scripted
