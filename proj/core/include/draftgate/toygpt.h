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

// A tiny seeded causal softmax model. Inputs enter only through their
// embedding vectors, so a token and its embedding row are interchangeable:
//
//   h_t      = sum_{j<=t} decay^(t-j) x_j / sum_{j<=t} decay^(t-j)
//   logits_t = gain * tanh(h_t) W_out
//
// Small enough (|V| <= 64, d <= 32) to enumerate every sequence of a few
// steps exactly.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "draftgate/backend.h"

namespace draftgate::toygpt {

inline constexpr int kMaxVocab = 64;
inline constexpr int kMaxDim = 32;
inline constexpr double kDecay = 0.7;
inline constexpr double kLogitGain = 4.0;

// Default pieces, indexed by token id; the last three ids of a vocabulary of
// at least five are the <think>, </think> and <eos> specials.
inline constexpr std::string_view kCharset =
    "0123456789+-*/=()[]{}<>abcdefghijklmnopqrstuvwxyz ,.:;!?'\"_#%&|@";

class ToyModel final : public Backend {
 public:
  ToyModel(std::uint64_t seed, int vocab_size, int dim);

  BackendInfo info() const override;
  EmbeddingVector token_embedding(TokenId v) const override;
  ProbVector next_distribution(std::span<const PrefixItem> prefix) const override;
  TeacherScores teacher_probs(SessionContext& session, std::span<const PrefixItem> context,
                              std::span<const StepRecord> records,
                              double temperature) const override;
  std::optional<std::string> token_piece(TokenId v) const override;
  std::optional<std::vector<TokenId>> tokenize(std::string_view text) const override;
  std::optional<Template> default_template() const override;

  // Raw distributions at every position of `items`, in one causal pass.
  std::vector<ProbVector> forward(std::span<const PrefixItem> items) const;

  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& embedding_matrix() const { return embedding_; }
  const std::vector<double>& output_matrix() const { return output_; }

  bool operator==(const ToyModel& other) const {
    return seed_ == other.seed_ && vocab_ == other.vocab_ && dim_ == other.dim_ &&
           embedding_ == other.embedding_ && output_ == other.output_;
  }

 private:
  std::span<const double> input_vector(const PrefixItem& item) const;
  ProbVector head(std::span<const double> hidden) const;

  std::uint64_t seed_;
  int vocab_;
  int dim_;
  std::vector<double> embedding_;  // vocab_ x dim_, row-major
  std::vector<double> output_;     // dim_ x vocab_, row-major
};

ToyModel build_toy(std::uint64_t seed, int vocab_size, int dim);

struct WeightedSequence {
  std::vector<TokenId> tokens;
  double probability = 0.0;
};

inline constexpr std::size_t kMaxEnumeration = 1'000'000;

// Every length-`length` continuation of `context` with its chain-rule
// probability under the temperature-adjusted distribution. Requires
// |V|^length <= kMaxEnumeration.
std::vector<WeightedSequence> enumerate_sequences(const Backend& model,
                                                  std::span<const PrefixItem> context, int length,
                                                  double temperature = 1.0);

}  // namespace draftgate::toygpt
