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

// Finite latent-state models in which a continuous prefix induces exactly the
// weight-mixture of the per-state answer distributions, together with the
// exact quantities the reliability score is compared against: the expected
// local score, the state/answer mutual information, the stability bound and
// the induced-answer entropy.
//
// Conventions: natural logs; 0*log(0) = 0; log(x/0) with x > 0 is an error.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "draftgate/backend.h"
#include "draftgate/types.h"

namespace draftgate::mixture {

struct LatentStateModel {
  // Distribution w over the n_S latent states.
  ProbVector weights;
  // per_state[s] is P_s over the n_A answers.
  std::vector<ProbVector> per_state;
  // Deterministic-answer map g; when set, P_s is one-hot at g(s).
  std::optional<std::vector<int>> answer_map;

  std::size_t num_states() const { return weights.size(); }
  std::size_t num_answers() const { return per_state.empty() ? 0 : per_state.front().size(); }
  bool operator==(const LatentStateModel&) const = default;
};

// Throws InvalidArgument unless the weights and every P_s are valid
// distributions of consistent size and any answer map agrees with P_s.
void validate(const LatentStateModel& m);

// Model whose state s deterministically emits g[s].
LatentStateModel deterministic_model(ProbVector weights, const std::vector<int>& g,
                                     std::size_t num_answers);

// Mixture P̄_w(a) = sum_s w(s) P_s(a).
ProbVector mixture_distribution(const LatentStateModel& m);

// log P_s(a) - log P̄_w(a). Requires w(s) > 0 and P_s(a) > 0.
double local_kappa(const LatentStateModel& m, std::size_t s, std::size_t a);

// sum_s w(s) KL(P_s || P̄_w).
double expected_kappa(const LatentStateModel& m);

// I(S;A) from the joint w(s)P_s(a) and both of its marginals.
double mutual_information(const LatentStateModel& m);

// sum_s w(s) KL(P_s || p_star).
double stability_bound(const LatentStateModel& m, std::span<const double> p_star);

// Entropy of rho(a) = sum_{s: g(s)=a} w(s). Requires an answer map.
double induced_answer_entropy(const LatentStateModel& m);

// Random model reproducible from `seed`; every P_s entry is at least `floor`,
// and so is every weight. Requires n_S, n_A >= 2 and floor < 1/n_A.
LatentStateModel random_model(std::uint64_t seed, std::size_t num_states, std::size_t num_answers,
                              double floor);

// Random distribution over `n` outcomes with every entry at least `floor`.
ProbVector random_distribution(Rng& rng, std::size_t n, double floor);

// JSON fixture format: {"weights": [...], "per_state": [[...], ...], "answer_map": [...]?}
std::string to_json(const LatentStateModel& m);
LatentStateModel from_json(std::string_view text);

// Backend view of a model. Vocabulary = n_S state markers followed by n_A
// answer tokens; marker s embeds as one-hot(s) in dimension n_S and answer
// tokens embed as zero. The distribution depends on the last prefix item:
// Discrete(marker s) gives P_s, Continuous(e) gives sum_s e[s] P_s, both lifted
// over the full vocabulary with zero mass on markers.
class MixtureBackend final : public Backend {
 public:
  explicit MixtureBackend(LatentStateModel model);

  BackendInfo info() const override;
  EmbeddingVector token_embedding(TokenId v) const override;
  ProbVector next_distribution(std::span<const PrefixItem> prefix) const override;

  const LatentStateModel& model() const { return model_; }
  TokenId marker_token(std::size_t s) const { return static_cast<TokenId>(s); }
  TokenId answer_token(std::size_t a) const {
    return static_cast<TokenId>(model_.num_states() + a);
  }
  // Weights w lifted over the full vocabulary (mass on markers only).
  ProbVector weight_distribution() const;

 private:
  LatentStateModel model_;
};

}  // namespace draftgate::mixture
