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

// The model contract every backend implements, and the generic helpers built
// on top of it: temperature, the truncating sampler, and mixture embeddings.
//
// Backends return the raw model distribution. The decoding distribution used
// for p_t, e_t and sampling is the temperature-adjusted full-vocabulary
// softmax; top-k/top-p/min-p truncation happens only inside sample().

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "draftgate/types.h"

namespace draftgate {

struct BackendInfo {
  int vocab_size = 0;
  int embedding_dim = 0;
  std::string identifier;

  bool operator==(const BackendInfo&) const = default;
};

struct TeacherScores {
  std::vector<double> probs;
};

// Deterministic 64-bit generator with a portable uniform draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t next() { return engine_(); }

  bool operator==(const Rng&) const = default;

 private:
  std::mt19937_64 engine_;
};

// Per-session state threaded through generation. Sessions never share one.
struct SessionContext {
  std::string id;
  std::uint64_t seed = 0;
  Rng rng;

  explicit SessionContext(std::string session_id = "session", std::uint64_t s = 0)
      : id(std::move(session_id)), seed(s), rng(s) {}
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendInfo info() const = 0;

  // Row v of the input embedding matrix.
  virtual EmbeddingVector token_embedding(TokenId v) const = 0;

  // Raw (temperature 1) next-token distribution after `prefix`.
  virtual ProbVector next_distribution(std::span<const PrefixItem> prefix) const = 0;

  // One decoding step: decoding distribution, sampled token, p_t and e_t.
  virtual StepRecord step(SessionContext& session, std::span<const PrefixItem> prefix,
                          const SamplingParams& params) const;

  // probs[t] is the decoding-distribution probability of records[t].token given
  // `context` followed by the cached embeddings of records[0..t-1].
  // The default walks the positions one at a time; backends with a native
  // causal forward pass override it with a single pass.
  virtual TeacherScores teacher_probs(SessionContext& session, std::span<const PrefixItem> context,
                                      std::span<const StepRecord> records,
                                      double temperature) const;

  // Releases server-side per-session state; no-op for local backends.
  virtual void end_session(SessionContext& /*session*/) const {}

  // Text of a token, when the backend has a vocabulary.
  virtual std::optional<std::string> token_piece(TokenId /*v*/) const { return std::nullopt; }

  // Tokenizer hook for raw-text prompts.
  virtual std::optional<std::vector<TokenId>> tokenize(std::string_view /*text*/) const {
    return std::nullopt;
  }

  // Template matching the backend's special tokens, when it has any.
  virtual std::optional<Template> default_template() const { return std::nullopt; }

 protected:
  void check_token(TokenId v) const;
};

// All token pieces, or nullopt if the backend exposes none.
std::optional<std::vector<std::string>> vocabulary_pieces(const Backend& backend);

// Concatenated text of `tokens`; tokens without a piece render as "<id>".
std::string detokenize(const Backend& backend, std::span<const TokenId> tokens);

// softmax(log(dist) / temperature), i.e. dist^(1/T) renormalised.
ProbVector apply_temperature(std::span<const double> dist, double temperature);

// e = sum_v dist[v] * E(v).
EmbeddingVector mixed_embedding(std::span<const double> dist, const Backend& backend);

// Temperature on logits, then top-k, then top-p, then min-p, renormalise,
// sample. `greedy` returns the argmax (lowest index on ties). Throws
// SamplingError if the filters leave no mass.
TokenId sample(std::span<const double> dist, const SamplingParams& params, Rng& rng);

// Index of the largest entry; lowest index wins ties.
TokenId argmax(std::span<const double> dist);

// Probability of `target` in `dist` with bounds checking.
double gather(std::span<const double> dist, TokenId target);

}  // namespace draftgate
