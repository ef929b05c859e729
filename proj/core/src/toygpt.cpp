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

#include "draftgate/toygpt.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "draftgate/errors.h"

namespace draftgate::toygpt {
namespace {

// Running state of the position-decayed average.
struct DecayState {
  std::vector<double> sum;
  double norm = 0.0;

  explicit DecayState(int dim) : sum(static_cast<std::size_t>(dim), 0.0) {}

  void push(std::span<const double> x) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = kDecay * sum[i] + x[i];
    norm = kDecay * norm + 1.0;
  }

  std::vector<double> hidden() const {
    std::vector<double> h(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) h[i] = sum[i] / norm;
    return h;
  }
};

bool has_specials(int vocab) { return vocab >= 5; }

}  // namespace

ToyModel::ToyModel(std::uint64_t seed, int vocab_size, int dim)
    : seed_(seed), vocab_(vocab_size), dim_(dim) {
  if (vocab_size < 2 || vocab_size > kMaxVocab) {
    throw InvalidArgument("toy vocabulary must lie in [2, " + std::to_string(kMaxVocab) + "]");
  }
  if (dim < 1 || dim > kMaxDim) {
    throw InvalidArgument("toy embedding dimension must lie in [1, " + std::to_string(kMaxDim) +
                          "]");
  }
  Rng rng(seed);
  embedding_.resize(static_cast<std::size_t>(vocab_) * static_cast<std::size_t>(dim_));
  for (auto& x : embedding_) x = rng.uniform() - 0.5;
  output_.resize(static_cast<std::size_t>(dim_) * static_cast<std::size_t>(vocab_));
  for (auto& x : output_) x = rng.uniform() - 0.5;
}

ToyModel build_toy(std::uint64_t seed, int vocab_size, int dim) {
  return ToyModel(seed, vocab_size, dim);
}

BackendInfo ToyModel::info() const {
  return BackendInfo{vocab_, dim_,
                     "toygpt(seed=" + std::to_string(seed_) + ",vocab=" + std::to_string(vocab_) +
                         ",dim=" + std::to_string(dim_) + ")"};
}

EmbeddingVector ToyModel::token_embedding(TokenId v) const {
  check_token(v);
  const auto row = static_cast<std::size_t>(v) * static_cast<std::size_t>(dim_);
  return EmbeddingVector(embedding_.begin() + static_cast<std::ptrdiff_t>(row),
                         embedding_.begin() + static_cast<std::ptrdiff_t>(row) + dim_);
}

std::span<const double> ToyModel::input_vector(const PrefixItem& item) const {
  if (const auto* d = std::get_if<Discrete>(&item)) {
    check_token(d->token);
    const auto row = static_cast<std::size_t>(d->token) * static_cast<std::size_t>(dim_);
    return std::span<const double>(embedding_).subspan(row, static_cast<std::size_t>(dim_));
  }
  const auto& e = std::get<Continuous>(item).embedding;
  if (e.size() != static_cast<std::size_t>(dim_)) {
    throw InvalidArgument("continuous item has dimension " + std::to_string(e.size()) +
                          ", expected " + std::to_string(dim_));
  }
  return e;
}

ProbVector ToyModel::head(std::span<const double> hidden) const {
  std::vector<double> logits(static_cast<std::size_t>(vocab_), 0.0);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const double act = std::tanh(hidden[i]);
    const double* row = output_.data() + i * static_cast<std::size_t>(vocab_);
    for (std::size_t v = 0; v < logits.size(); ++v) logits[v] += act * row[v];
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (auto& l : logits) {
    l *= kLogitGain;
    max_logit = std::max(max_logit, l);
  }
  double sum = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - max_logit);
    sum += l;
  }
  for (auto& l : logits) l /= sum;
  return logits;
}

std::vector<ProbVector> ToyModel::forward(std::span<const PrefixItem> items) const {
  DecayState state(dim_);
  std::vector<ProbVector> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    state.push(input_vector(item));
    out.push_back(head(state.hidden()));
  }
  return out;
}

ProbVector ToyModel::next_distribution(std::span<const PrefixItem> prefix) const {
  if (prefix.empty()) throw InvalidArgument("toy model needs a non-empty prefix");
  DecayState state(dim_);
  for (const auto& item : prefix) state.push(input_vector(item));
  return head(state.hidden());
}

TeacherScores ToyModel::teacher_probs(SessionContext& /*session*/,
                                      std::span<const PrefixItem> context,
                                      std::span<const StepRecord> records,
                                      double temperature) const {
  if (records.empty()) throw InvalidArgument("teacher pass needs at least one record");
  if (context.empty()) throw InvalidArgument("toy model needs a non-empty context");
  // One causal sweep over context + e_1..e_{T-1}; outputs are read at the last
  // context position and after each tail embedding.
  DecayState state(dim_);
  for (const auto& item : context) state.push(input_vector(item));
  TeacherScores scores;
  scores.probs.reserve(records.size());
  for (std::size_t t = 0; t < records.size(); ++t) {
    if (t > 0) {
      const auto& e = records[t - 1].embedding;
      if (e.size() != static_cast<std::size_t>(dim_)) {
        throw InvalidArgument("record embedding has the wrong dimension");
      }
      state.push(e);
    }
    const ProbVector dist = apply_temperature(head(state.hidden()), temperature);
    scores.probs.push_back(gather(dist, records[t].token));
  }
  return scores;
}

std::optional<std::string> ToyModel::token_piece(TokenId v) const {
  if (v < 0 || v >= vocab_) return std::nullopt;
  if (has_specials(vocab_)) {
    if (v == vocab_ - 3) return std::string("<think>");
    if (v == vocab_ - 2) return std::string("</think>");
    if (v == vocab_ - 1) return std::string("<eos>");
  }
  return std::string(1, kCharset[static_cast<std::size_t>(v)]);
}

std::optional<std::vector<TokenId>> ToyModel::tokenize(std::string_view text) const {
  const int plain = has_specials(vocab_) ? vocab_ - 3 : vocab_;
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (char c : text) {
    const auto pos = kCharset.find(c);
    if (pos == std::string_view::npos || static_cast<int>(pos) >= plain) return std::nullopt;
    out.push_back(static_cast<TokenId>(pos));
  }
  return out;
}

std::optional<Template> ToyModel::default_template() const {
  if (!has_specials(vocab_)) return std::nullopt;
  Template t;
  t.think_open = {vocab_ - 3};
  t.think_close = {vocab_ - 2};
  t.end_tokens = {vocab_ - 1};
  return t;
}

std::vector<WeightedSequence> enumerate_sequences(const Backend& model,
                                                  std::span<const PrefixItem> context, int length,
                                                  double temperature) {
  if (length < 0) throw InvalidArgument("sequence length must be non-negative");
  const auto vocab = static_cast<std::size_t>(model.info().vocab_size);
  double count = 1.0;
  for (int i = 0; i < length; ++i) count *= static_cast<double>(vocab);
  if (count > static_cast<double>(kMaxEnumeration)) {
    throw InvalidArgument("enumeration of " + std::to_string(vocab) + "^" +
                          std::to_string(length) + " sequences exceeds the bound");
  }
  std::vector<WeightedSequence> frontier{{{}, 1.0}};
  std::vector<PrefixItem> prefix(context.begin(), context.end());
  for (int step = 0; step < length; ++step) {
    std::vector<WeightedSequence> next;
    next.reserve(frontier.size() * vocab);
    for (const auto& seq : frontier) {
      prefix.resize(context.size());
      for (TokenId t : seq.tokens) prefix.emplace_back(Discrete{t});
      const ProbVector dist = apply_temperature(model.next_distribution(prefix), temperature);
      for (std::size_t v = 0; v < vocab; ++v) {
        WeightedSequence child{seq.tokens, seq.probability * dist[v]};
        child.tokens.push_back(static_cast<TokenId>(v));
        next.push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  return frontier;
}

}  // namespace draftgate::toygpt
