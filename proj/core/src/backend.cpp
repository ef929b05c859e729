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

#include "draftgate/backend.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "draftgate/errors.h"

namespace draftgate {

void Backend::check_token(TokenId v) const {
  const int vocab = info().vocab_size;
  if (v < 0 || v >= vocab) {
    throw InvalidArgument("token " + std::to_string(v) + " outside vocabulary of size " +
                          std::to_string(vocab));
  }
}

StepRecord Backend::step(SessionContext& session, std::span<const PrefixItem> prefix,
                         const SamplingParams& params) const {
  const ProbVector raw = next_distribution(prefix);
  const TokenId token = sample(raw, params, session.rng);
  const ProbVector decoding = apply_temperature(raw, params.temperature);
  return make_step_record(token, gather(decoding, token), mixed_embedding(decoding, *this));
}

TeacherScores Backend::teacher_probs(SessionContext& /*session*/,
                                     std::span<const PrefixItem> context,
                                     std::span<const StepRecord> records,
                                     double temperature) const {
  if (records.empty()) throw InvalidArgument("teacher pass needs at least one record");
  std::vector<PrefixItem> prefix(context.begin(), context.end());
  TeacherScores scores;
  scores.probs.reserve(records.size());
  for (const auto& r : records) {
    const ProbVector dist = apply_temperature(next_distribution(prefix), temperature);
    scores.probs.push_back(gather(dist, r.token));
    prefix.emplace_back(Continuous{r.embedding});
  }
  return scores;
}

std::optional<std::vector<std::string>> vocabulary_pieces(const Backend& backend) {
  const int vocab = backend.info().vocab_size;
  std::vector<std::string> pieces;
  pieces.reserve(static_cast<std::size_t>(vocab));
  for (TokenId v = 0; v < vocab; ++v) {
    auto piece = backend.token_piece(v);
    if (!piece) return std::nullopt;
    pieces.push_back(std::move(*piece));
  }
  return pieces;
}

std::string detokenize(const Backend& backend, std::span<const TokenId> tokens) {
  std::string out;
  for (TokenId t : tokens) {
    if (auto piece = backend.token_piece(t)) {
      out += *piece;
    } else {
      out += "<" + std::to_string(t) + ">";
    }
  }
  return out;
}

ProbVector apply_temperature(std::span<const double> dist, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  ProbVector out(dist.size(), 0.0);
  if (temperature == 1.0) {
    const double sum = std::accumulate(dist.begin(), dist.end(), 0.0);
    for (std::size_t i = 0; i < dist.size(); ++i) out[i] = dist[i] / sum;
    return out;
  }
  const double inv_t = 1.0 / temperature;
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double p : dist) {
    if (p > 0.0) max_logit = std::max(max_logit, std::log(p) * inv_t);
  }
  if (!std::isfinite(max_logit)) throw InvalidArgument("distribution has no mass");
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) {
      out[i] = std::exp(std::log(dist[i]) * inv_t - max_logit);
      sum += out[i];
    }
  }
  for (double& p : out) p /= sum;
  return out;
}

EmbeddingVector mixed_embedding(std::span<const double> dist, const Backend& backend) {
  const BackendInfo info = backend.info();
  if (dist.size() != static_cast<std::size_t>(info.vocab_size)) {
    throw InvalidArgument("distribution length does not match vocabulary");
  }
  EmbeddingVector e(static_cast<std::size_t>(info.embedding_dim), 0.0);
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] == 0.0) continue;
    const EmbeddingVector row = backend.token_embedding(static_cast<TokenId>(v));
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += dist[v] * row[i];
  }
  return e;
}

TokenId argmax(std::span<const double> dist) {
  if (dist.empty()) throw InvalidArgument("argmax of an empty distribution");
  return static_cast<TokenId>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

double gather(std::span<const double> dist, TokenId target) {
  if (target < 0 || static_cast<std::size_t>(target) >= dist.size()) {
    throw InvalidArgument("target token " + std::to_string(target) + " outside distribution");
  }
  return dist[static_cast<std::size_t>(target)];
}

TokenId sample(std::span<const double> dist, const SamplingParams& params, Rng& rng) {
  validate_sampling_params(params);
  if (!validate_prob_vector(dist)) throw InvalidArgument("cannot sample from an invalid distribution");
  if (params.greedy) return argmax(dist);

  struct Candidate {
    TokenId token;
    double logit;
    double prob;
  };
  std::vector<Candidate> cands;
  cands.reserve(dist.size());
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] > 0.0) {
      cands.push_back({static_cast<TokenId>(v), std::log(dist[v]) / params.temperature, 0.0});
    }
  }
  if (cands.empty()) throw SamplingError("distribution has no mass to sample from");

  // Descending by logit; stable on token id so ties are deterministic.
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.logit > b.logit; });

  if (params.top_k > 0 && static_cast<std::size_t>(params.top_k) < cands.size()) {
    cands.resize(static_cast<std::size_t>(params.top_k));
  }

  auto renormalise = [&cands]() {
    const double max_logit = cands.front().logit;
    double sum = 0.0;
    for (auto& c : cands) {
      c.prob = std::exp(c.logit - max_logit);
      sum += c.prob;
    }
    for (auto& c : cands) c.prob /= sum;
  };
  renormalise();

  if (params.top_p < 1.0) {
    double cum = 0.0;
    std::size_t keep = 0;
    while (keep < cands.size()) {
      cum += cands[keep].prob;
      ++keep;
      if (cum >= params.top_p) break;
    }
    cands.resize(keep);
    renormalise();
  }

  if (params.min_p > 0.0) {
    const double floor = params.min_p * cands.front().prob;
    std::erase_if(cands, [floor](const Candidate& c) { return c.prob < floor; });
    if (cands.empty()) throw SamplingError("min_p filter removed every candidate");
    renormalise();
  }

  const double u = rng.uniform();
  double cum = 0.0;
  for (const auto& c : cands) {
    cum += c.prob;
    if (u < cum) return c.token;
  }
  return cands.back().token;
}

}  // namespace draftgate
