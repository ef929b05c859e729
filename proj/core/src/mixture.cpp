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

#include "draftgate/mixture.h"

#include <cmath>
#include <string>

#include "draftgate/errors.h"
#include "json.hpp"

namespace draftgate::mixture {
namespace {

// p * log(p / q) with 0 log 0 = 0; q == 0 < p is rejected.
double kl_term(double p, double q) {
  if (p == 0.0) return 0.0;
  if (q == 0.0) throw InvalidArgument("KL term log(p/0) is undefined");
  return p * (std::log(p) - std::log(q));
}

}  // namespace

void validate(const LatentStateModel& m) {
  if (m.weights.empty()) throw InvalidArgument("model has no latent states");
  if (!validate_prob_vector(m.weights)) throw InvalidArgument("state weights are not a distribution");
  if (m.per_state.size() != m.weights.size()) {
    throw InvalidArgument("need one answer distribution per state");
  }
  const std::size_t n_a = m.per_state.front().size();
  if (n_a == 0) throw InvalidArgument("answer alphabet is empty");
  for (const auto& p : m.per_state) {
    if (p.size() != n_a) throw InvalidArgument("answer distributions differ in size");
    if (!validate_prob_vector(p)) throw InvalidArgument("answer distribution is not valid");
  }
  if (m.answer_map) {
    const auto& g = *m.answer_map;
    if (g.size() != m.weights.size()) throw InvalidArgument("answer map size mismatch");
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (g[s] < 0 || static_cast<std::size_t>(g[s]) >= n_a) {
        throw InvalidArgument("answer map target out of range");
      }
      for (std::size_t a = 0; a < n_a; ++a) {
        const double want = static_cast<std::size_t>(g[s]) == a ? 1.0 : 0.0;
        if (m.per_state[s][a] != want) {
          throw InvalidArgument("answer map present but P_s is not one-hot at g(s)");
        }
      }
    }
  }
}

LatentStateModel deterministic_model(ProbVector weights, const std::vector<int>& g,
                                     std::size_t num_answers) {
  LatentStateModel m;
  m.weights = std::move(weights);
  m.answer_map = g;
  for (int target : g) {
    ProbVector p(num_answers, 0.0);
    if (target < 0 || static_cast<std::size_t>(target) >= num_answers) {
      throw InvalidArgument("answer map target out of range");
    }
    p[static_cast<std::size_t>(target)] = 1.0;
    m.per_state.push_back(std::move(p));
  }
  validate(m);
  return m;
}

ProbVector mixture_distribution(const LatentStateModel& m) {
  ProbVector mix(m.num_answers(), 0.0);
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    for (std::size_t a = 0; a < mix.size(); ++a) mix[a] += m.weights[s] * m.per_state[s][a];
  }
  return mix;
}

double local_kappa(const LatentStateModel& m, std::size_t s, std::size_t a) {
  if (s >= m.num_states() || a >= m.num_answers()) throw InvalidArgument("index out of range");
  if (!(m.weights[s] > 0.0)) throw InvalidArgument("state has zero weight");
  const double p = m.per_state[s][a];
  if (!(p > 0.0)) throw InvalidArgument("answer has zero probability under the state");
  const double mix = mixture_distribution(m)[a];
  return std::log(p) - std::log(mix);
}

double expected_kappa(const LatentStateModel& m) {
  const ProbVector mix = mixture_distribution(m);
  double total = 0.0;
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    if (m.weights[s] == 0.0) continue;
    double kl = 0.0;
    for (std::size_t a = 0; a < mix.size(); ++a) kl += kl_term(m.per_state[s][a], mix[a]);
    total += m.weights[s] * kl;
  }
  return total;
}

double mutual_information(const LatentStateModel& m) {
  const std::size_t n_s = m.num_states();
  const std::size_t n_a = m.num_answers();
  std::vector<double> joint(n_s * n_a);
  for (std::size_t s = 0; s < n_s; ++s) {
    for (std::size_t a = 0; a < n_a; ++a) joint[s * n_a + a] = m.weights[s] * m.per_state[s][a];
  }
  std::vector<double> ps(n_s, 0.0), pa(n_a, 0.0);
  for (std::size_t s = 0; s < n_s; ++s) {
    for (std::size_t a = 0; a < n_a; ++a) {
      ps[s] += joint[s * n_a + a];
      pa[a] += joint[s * n_a + a];
    }
  }
  double mi = 0.0;
  for (std::size_t s = 0; s < n_s; ++s) {
    for (std::size_t a = 0; a < n_a; ++a) {
      const double j = joint[s * n_a + a];
      if (j == 0.0) continue;
      mi += j * (std::log(j) - std::log(ps[s]) - std::log(pa[a]));
    }
  }
  return mi;
}

double stability_bound(const LatentStateModel& m, std::span<const double> p_star) {
  if (p_star.size() != m.num_answers()) throw InvalidArgument("p_star has the wrong size");
  if (!validate_prob_vector(p_star)) throw InvalidArgument("p_star is not a distribution");
  double total = 0.0;
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    if (m.weights[s] == 0.0) continue;
    double kl = 0.0;
    for (std::size_t a = 0; a < p_star.size(); ++a) kl += kl_term(m.per_state[s][a], p_star[a]);
    total += m.weights[s] * kl;
  }
  return total;
}

double induced_answer_entropy(const LatentStateModel& m) {
  if (!m.answer_map) throw InvalidArgument("model has no deterministic answer map");
  std::vector<double> rho(m.num_answers(), 0.0);
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    rho[static_cast<std::size_t>((*m.answer_map)[s])] += m.weights[s];
  }
  double h = 0.0;
  for (double r : rho) {
    if (r > 0.0) h -= r * std::log(r);
  }
  return h;
}

ProbVector random_distribution(Rng& rng, std::size_t n, double floor) {
  if (n == 0) throw InvalidArgument("empty distribution");
  if (floor < 0.0 || floor * static_cast<double>(n) >= 1.0) {
    throw InvalidArgument("probability floor " + std::to_string(floor) + " infeasible for " +
                          std::to_string(n) + " outcomes");
  }
  // Exponential spacings give a uniform draw from the simplex; the floor is
  // then mixed in.
  ProbVector raw(n);
  double sum = 0.0;
  for (auto& x : raw) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  const double free_mass = 1.0 - floor * static_cast<double>(n);
  for (auto& x : raw) x = floor + free_mass * (x / sum);
  return raw;
}

LatentStateModel random_model(std::uint64_t seed, std::size_t num_states, std::size_t num_answers,
                              double floor) {
  if (num_states < 2 || num_answers < 2) {
    throw InvalidArgument("random models need at least two states and two answers");
  }
  if (floor < 0.0 || floor * static_cast<double>(num_answers) >= 1.0) {
    throw InvalidArgument("probability floor " + std::to_string(floor) + " infeasible for " +
                          std::to_string(num_answers) + " answers");
  }
  Rng rng(seed);
  LatentStateModel m;
  const double weight_floor = floor * static_cast<double>(num_states) < 1.0 ? floor : 0.0;
  m.weights = random_distribution(rng, num_states, weight_floor);
  for (std::size_t s = 0; s < num_states; ++s) {
    m.per_state.push_back(random_distribution(rng, num_answers, floor));
  }
  return m;
}

std::string to_json(const LatentStateModel& m) {
  nlohmann::json j = {{"weights", m.weights}, {"per_state", m.per_state}};
  if (m.answer_map) j["answer_map"] = *m.answer_map;
  return j.dump();
}

LatentStateModel from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    LatentStateModel m;
    m.weights = j.at("weights").get<ProbVector>();
    m.per_state = j.at("per_state").get<std::vector<ProbVector>>();
    if (j.contains("answer_map") && !j.at("answer_map").is_null()) {
      m.answer_map = j.at("answer_map").get<std::vector<int>>();
    }
    validate(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model JSON: ") + e.what());
  }
}

MixtureBackend::MixtureBackend(LatentStateModel model) : model_(std::move(model)) {
  validate(model_);
}

BackendInfo MixtureBackend::info() const {
  return BackendInfo{static_cast<int>(model_.num_states() + model_.num_answers()),
                     static_cast<int>(model_.num_states()),
                     "mixture(states=" + std::to_string(model_.num_states()) +
                         ",answers=" + std::to_string(model_.num_answers()) + ")"};
}

EmbeddingVector MixtureBackend::token_embedding(TokenId v) const {
  check_token(v);
  EmbeddingVector e(model_.num_states(), 0.0);
  if (static_cast<std::size_t>(v) < model_.num_states()) e[static_cast<std::size_t>(v)] = 1.0;
  return e;
}

ProbVector MixtureBackend::weight_distribution() const {
  ProbVector out(model_.num_states() + model_.num_answers(), 0.0);
  for (std::size_t s = 0; s < model_.num_states(); ++s) out[s] = model_.weights[s];
  return out;
}

ProbVector MixtureBackend::next_distribution(std::span<const PrefixItem> prefix) const {
  if (prefix.empty()) throw InvalidArgument("mixture backend needs a non-empty prefix");
  const std::size_t n_s = model_.num_states();
  const std::size_t n_a = model_.num_answers();
  EmbeddingVector coeffs;
  if (const auto* d = std::get_if<Discrete>(&prefix.back())) {
    check_token(d->token);
    if (static_cast<std::size_t>(d->token) >= n_s) {
      throw InvalidArgument("answer tokens are terminal and cannot condition the mixture backend");
    }
    coeffs = token_embedding(d->token);
  } else {
    coeffs = std::get<Continuous>(prefix.back()).embedding;
    if (coeffs.size() != n_s) throw InvalidArgument("continuous item has the wrong dimension");
    if (!validate_prob_vector(coeffs)) {
      throw InvalidArgument("continuous item is not a point on the state simplex");
    }
  }
  ProbVector out(n_s + n_a, 0.0);
  for (std::size_t s = 0; s < n_s; ++s) {
    if (coeffs[s] == 0.0) continue;
    for (std::size_t a = 0; a < n_a; ++a) out[n_s + a] += coeffs[s] * model_.per_state[s][a];
  }
  return out;
}

}  // namespace draftgate::mixture
