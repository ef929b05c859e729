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

// Reverse-KL reliability scores and the decision rules built on them.
//
// The score of a generated span is the mean, over its positions, of
// log p_t - log p_t^e, where p_t is the probability the token had when it was
// sampled (discrete prefix) and p_t^e is its probability when the span's
// earlier tokens are replaced by their cached mixture embeddings. Its
// expectation over sampled spans is the length-normalised sequence-level
// reverse KL between the two continuation distributions.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "draftgate/backend.h"
#include "draftgate/types.h"

namespace draftgate {

// Mean of (records[t].chosen_logprob - log teacher.probs[t]).
// Throws InvalidArgument on length mismatch, an empty span, or a teacher
// probability that is not strictly positive.
double kappa_hat(std::span<const StepRecord> records, std::span<const double> teacher_probs);
double kappa_hat(std::span<const StepRecord> records, const TeacherScores& teacher);

// Number of kappa_hat evaluations performed by this process.
std::uint64_t estimator_invocations();

struct ChunkLayout {
  int chunk_size = 1;
  int draft_len = 0;
  int count = 0;

  // 1-based position s_k = T_a + 1 + (k - 1) C of chunk k.
  int start(int k) const { return draft_len + 1 + (k - 1) * chunk_size; }
  std::vector<int> starts() const;
};

// C = max(1, floor(T_a / 4)) under the default rule, or the fixed size.
ChunkLayout chunk_layout(int draft_len, const ChunkPolicy& policy, int count = 0);

// m_{k+1} = 1 iff kappa_r^(k) < tau_r.
int visibility_update(double kappa_r, double tau_r);

// Think iff kappa_a > tau_a.
Decision draft_decision(double kappa_a, double tau_a);

struct SpanMatch {
  IndexRange range;
  bool found = false;
};

// Token range covering the last `open ... close` occurrence in the text made
// by concatenating `pieces`, delimiters included. Braces nest when the
// closing delimiter is "}". Falls back to the whole range when absent.
SpanMatch answer_span(std::span<const std::string> pieces, const SpanPattern& pattern);

}  // namespace draftgate
