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

#include "draftgate/estimators.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "draftgate/errors.h"

namespace draftgate {
namespace {

std::atomic<std::uint64_t> g_invocations{0};

}  // namespace

double kappa_hat(std::span<const StepRecord> records, std::span<const double> teacher_probs) {
  if (records.empty()) throw InvalidArgument("cannot score an empty span");
  if (records.size() != teacher_probs.size()) {
    throw InvalidArgument("record/teacher length mismatch: " + std::to_string(records.size()) +
                          " vs " + std::to_string(teacher_probs.size()));
  }
  g_invocations.fetch_add(1, std::memory_order_relaxed);
  double sum = 0.0;
  for (std::size_t t = 0; t < records.size(); ++t) {
    const double q = teacher_probs[t];
    if (!(q > 0.0)) {
      throw InvalidArgument("teacher probability at position " + std::to_string(t) +
                            " is not positive (numerical underflow upstream?)");
    }
    sum += records[t].chosen_logprob - std::log(q);
  }
  return sum / static_cast<double>(records.size());
}

double kappa_hat(std::span<const StepRecord> records, const TeacherScores& teacher) {
  return kappa_hat(records, std::span<const double>(teacher.probs));
}

std::uint64_t estimator_invocations() { return g_invocations.load(std::memory_order_relaxed); }

std::vector<int> ChunkLayout::starts() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 1; k <= count; ++k) out.push_back(start(k));
  return out;
}

ChunkLayout chunk_layout(int draft_len, const ChunkPolicy& policy, int count) {
  if (draft_len < 1) throw InvalidArgument("chunk layout needs a draft of at least one token");
  ChunkLayout layout;
  layout.draft_len = draft_len;
  layout.count = count;
  if (policy.kind == ChunkPolicy::Kind::kFixed) {
    if (policy.fixed_size < 1) throw InvalidArgument("fixed chunk size must be at least 1");
    layout.chunk_size = policy.fixed_size;
  } else {
    layout.chunk_size = std::max(1, draft_len / 4);
  }
  return layout;
}

int visibility_update(double kappa_r, double tau_r) { return kappa_r < tau_r ? 1 : 0; }

Decision draft_decision(double kappa_a, double tau_a) {
  return kappa_a > tau_a ? Decision::kThinkTriggered : Decision::kAccepted;
}

SpanMatch answer_span(std::span<const std::string> pieces, const SpanPattern& pattern) {
  const IndexRange whole{0, pieces.size()};
  if (pattern.open.empty() || pattern.close.empty()) return {whole, false};

  std::string text;
  std::vector<std::size_t> owner;  // token index of each character
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    text += pieces[i];
    owner.insert(owner.end(), pieces[i].size(), i);
  }

  const auto open_at = text.rfind(pattern.open);
  if (open_at == std::string::npos) return {whole, false};
  const std::size_t body = open_at + pattern.open.size();

  std::size_t close_at = std::string::npos;
  if (pattern.close == "}") {
    int depth = 1;
    for (std::size_t i = body; i < text.size(); ++i) {
      if (text[i] == '{') {
        ++depth;
      } else if (text[i] == '}' && --depth == 0) {
        close_at = i;
        break;
      }
    }
  } else {
    close_at = text.find(pattern.close, body);
  }
  if (close_at == std::string::npos) return {whole, false};

  const std::size_t last_char = close_at + pattern.close.size() - 1;
  return {IndexRange{owner[open_at], owner[last_char] + 1}, true};
}

}  // namespace draftgate
