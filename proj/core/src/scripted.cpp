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

#include "draftgate/scripted.h"

#include <algorithm>
#include <string>

#include "draftgate/errors.h"

namespace draftgate::scripted {
namespace {

ProbVector one_hot(int vocab, TokenId t) {
  ProbVector p(static_cast<std::size_t>(vocab), 0.0);
  p[static_cast<std::size_t>(t)] = 1.0;
  return p;
}

ProbVector planned_distribution(int vocab, const PlannedStep& step, bool soft) {
  const double prob = soft ? step.soft_prob : step.prob;
  if (!(prob > 0.0 && prob <= 1.0)) throw InvalidArgument("planned probability outside (0, 1]");
  if (prob == 1.0) return one_hot(vocab, step.token);
  const int others = vocab - kFirstPiece - 1;
  if (others < 1) throw InvalidArgument("a non-degenerate plan needs at least two pieces");
  ProbVector p(static_cast<std::size_t>(vocab), 0.0);
  const double rest = (1.0 - prob) / static_cast<double>(others);
  for (int v = kFirstPiece; v < vocab; ++v) p[static_cast<std::size_t>(v)] = rest;
  p[static_cast<std::size_t>(step.token)] = prob;
  return p;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<std::string> pieces, ScriptFn script)
    : script_(std::move(script)) {
  if (pieces.empty()) throw InvalidArgument("scripted backend needs at least one piece");
  pieces_ = {"<eos>", "<think>", "</think>"};
  pieces_.insert(pieces_.end(), pieces.begin(), pieces.end());
}

BackendInfo ScriptedBackend::info() const {
  return BackendInfo{vocab_size(), vocab_size(),
                     "scripted(vocab=" + std::to_string(vocab_size()) + ")"};
}

EmbeddingVector ScriptedBackend::token_embedding(TokenId v) const {
  check_token(v);
  EmbeddingVector e(pieces_.size(), 0.0);
  e[static_cast<std::size_t>(v)] = 1.0;
  return e;
}

ProbVector ScriptedBackend::next_distribution(std::span<const PrefixItem> prefix) const {
  if (prefix.empty()) throw InvalidArgument("scripted backend needs a non-empty prefix");
  ScriptView view;
  view.tokens.reserve(prefix.size());
  for (const auto& item : prefix) {
    if (const auto* d = std::get_if<Discrete>(&item)) {
      check_token(d->token);
      view.tokens.push_back(d->token);
      continue;
    }
    const auto& e = std::get<Continuous>(item).embedding;
    if (e.size() != pieces_.size()) throw InvalidArgument("continuous item has the wrong dimension");
    const TokenId top = argmax(e);
    const bool exact_one_hot =
        e[static_cast<std::size_t>(top)] == 1.0 &&
        std::count(e.begin(), e.end(), 0.0) == static_cast<std::ptrdiff_t>(e.size() - 1);
    if (!exact_one_hot) ++view.soft_items;
    view.tokens.push_back(top);
  }
  ProbVector dist = script_(view);
  if (dist.size() != pieces_.size() || !validate_prob_vector(dist)) {
    throw BackendError("script returned an invalid distribution");
  }
  return dist;
}

std::optional<std::string> ScriptedBackend::token_piece(TokenId v) const {
  if (v < 0 || static_cast<std::size_t>(v) >= pieces_.size()) return std::nullopt;
  return pieces_[static_cast<std::size_t>(v)];
}

std::optional<std::vector<TokenId>> ScriptedBackend::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    TokenId best = -1;
    std::size_t best_len = 0;
    for (std::size_t v = kFirstPiece; v < pieces_.size(); ++v) {
      const auto& p = pieces_[v];
      if (p.size() > best_len && text.substr(pos, p.size()) == p) {
        best = static_cast<TokenId>(v);
        best_len = p.size();
      }
    }
    if (best < 0) return std::nullopt;
    out.push_back(best);
    pos += best_len;
  }
  return out;
}

std::optional<Template> ScriptedBackend::default_template() const {
  Template t;
  t.think_open = {kThinkOpen};
  t.think_close = {kThinkClose};
  t.end_tokens = {kEos};
  return t;
}

TokenId ScriptedBackend::token(std::string_view piece) const {
  for (std::size_t v = kFirstPiece; v < pieces_.size(); ++v) {
    if (pieces_[v] == piece) return static_cast<TokenId>(v);
  }
  throw InvalidArgument("unknown piece '" + std::string(piece) + "'");
}

ScriptFn plan_script(std::function<ScriptPlan(TokenId)> planner, int vocab_size) {
  return [planner = std::move(planner), vocab_size](const ScriptView& view) -> ProbVector {
    const auto& toks = view.tokens;
    const auto open = std::find(toks.begin(), toks.end(), kThinkOpen);
    if (toks.empty() || open == toks.end() || open == toks.begin()) {
      return one_hot(vocab_size, kEos);
    }
    const ScriptPlan plan = planner(toks.front());
    const bool soft = view.soft_items > 0;
    const auto emit = [&](const std::vector<PlannedStep>& steps, std::size_t idx,
                          TokenId terminator) {
      return idx < steps.size() ? planned_distribution(vocab_size, steps[idx], soft)
                                : one_hot(vocab_size, terminator);
    };

    const auto open_at = static_cast<std::size_t>(open - toks.begin());
    if (open_at + 1 < toks.size() && toks[open_at + 1] == kThinkClose) {
      return emit(plan.draft, toks.size() - (open_at + 2), kEos);
    }
    const auto close = std::find(open + 1, toks.end(), kThinkClose);
    if (close == toks.end()) return emit(plan.thinking, toks.size() - (open_at + 1), kThinkClose);
    const auto close_at = static_cast<std::size_t>(close - toks.begin());
    return emit(plan.answer, toks.size() - (close_at + 1), kEos);
  };
}

}  // namespace draftgate::scripted
