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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Runs on the mixture, toy and scripted backends only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "draftgate/controller.h"
#include "draftgate/estimators.h"
#include "draftgate/mixture.h"
#include "draftgate/toygpt.h"
#include "draftgate/transcript_io.h"
#include "fixtures.h"
#include "oracles.h"

namespace dg = draftgate;
namespace mx = draftgate::mixture;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t pick(dg::Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

Verdict a1_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  dg::Rng rng(2026);
  double lib_gap = 0.0, oracle_gap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = mx::random_model(rng.next(), pick(rng, 2, 8), pick(rng, 2, 16), 0.01);
    const double ek = mx::expected_kappa(m);
    lib_gap = std::max(lib_gap, std::abs(ek - mx::mutual_information(m)));
    oracle_gap = std::max(oracle_gap, std::abs(ek - oracle::mutual_information(m.weights, m.per_state)));
  }
  const double secs = seconds_since(t0);
  const double gap = std::max(lib_gap, oracle_gap);
  return {gap <= 1e-10 && secs < 5.0,
          "max |E[kappa] - I(S;A)| = " + sci(gap) + " over 1000 mixtures in " + sci(secs) + " s"};
}

Verdict a2_corollaries() {
  dg::Rng rng(11);
  double harmless = 0.0, excess = -1.0, det = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto m = mx::random_model(rng.next(), pick(rng, 2, 8), pick(rng, 2, 16), 0.01);
    const auto p_star = mx::random_distribution(rng, m.num_answers(), 0.001);
    excess = std::max(excess, mx::expected_kappa(m) - mx::stability_bound(m, p_star));

    for (auto& p : m.per_state) p = m.per_state.front();
    for (std::size_t s = 0; s < m.num_states(); ++s) {
      for (std::size_t a = 0; a < m.num_answers(); ++a) {
        harmless = std::max(harmless, std::abs(mx::local_kappa(m, s, a)));
      }
    }

    const std::size_t n_s = pick(rng, 2, 8), n_a = pick(rng, 2, 16);
    const auto w = mx::random_distribution(rng, n_s, 0.01);
    std::vector<int> g(n_s);
    for (auto& a : g) a = static_cast<int>(pick(rng, 0, n_a - 1));
    const auto dm = mx::deterministic_model(w, g, n_a);
    std::vector<double> rho(n_a, 0.0);
    for (std::size_t s = 0; s < n_s; ++s) rho[static_cast<std::size_t>(g[s])] += w[s];
    det = std::max(det, std::abs(mx::expected_kappa(dm) - mx::induced_answer_entropy(dm)));
    det = std::max(det, std::abs(mx::expected_kappa(dm) - oracle::entropy(rho)));
  }
  const auto binary = mx::deterministic_model({0.5, 0.5}, {0, 1}, 2);
  const double ln2_gap = std::abs(mx::expected_kappa(binary) - std::log(2.0));
  const bool pass = harmless <= 1e-12 && excess <= 0.0 && det <= 1e-12 && ln2_gap <= 1e-12;
  return {pass, "harmless max |kappa| = " + sci(harmless) + "; stability max excess = " + sci(excess) +
                    "; deterministic max gap = " + sci(det) + "; |E[kappa] - ln 2| = " + sci(ln2_gap)};
}

// E over all length-3 drafts of kappa_hat versus the per-token sequence KL.
Verdict a3_unbiased() {
  const auto t0 = std::chrono::steady_clock::now();
  const double temperature = 0.6;
  double worst = 0.0;
  bool shape_ok = true;
  for (std::uint64_t seed = 7; seed < 12; ++seed) {
    const auto model = dg::toygpt::build_toy(seed, 4, 4);
    const std::vector<dg::PrefixItem> context{dg::Discrete{0}};
    const auto seqs = dg::toygpt::enumerate_sequences(model, context, 3, temperature);
    shape_ok = shape_ok && seqs.size() == 64;
    double mean = 0.0;
    for (const auto& seq : seqs) {
      std::vector<dg::StepRecord> records;
      std::vector<dg::PrefixItem> prefix = context;
      for (dg::TokenId tok : seq.tokens) {
        const auto p = dg::apply_temperature(model.next_distribution(prefix), temperature);
        records.push_back(dg::make_step_record(tok, dg::gather(p, tok), dg::mixed_embedding(p, model)));
        prefix.emplace_back(dg::Discrete{tok});
      }
      dg::SessionContext session("a3", seed);
      mean += seq.probability * dg::kappa_hat(records, model.teacher_probs(session, context, records, temperature));
    }
    const auto ref = oracle::sequence_kl(model, context, 3, temperature);
    shape_ok = shape_ok && ref.count == 64 && std::abs(ref.total_probability - 1.0) <= 1e-9;
    worst = std::max(worst, std::abs(mean - ref.kl / 3.0));
  }
  const double secs = seconds_since(t0);
  return {shape_ok && worst <= 1e-9 && secs < 10.0,
          "max |E[kappa_hat] - KL/3| = " + sci(worst) + " over 5 seeds x 64 sequences in " + sci(secs) + " s"};
}

Verdict a4_teacher() {
  dg::Rng rng(404);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int vocab = static_cast<int>(pick(rng, 4, 64));
    const int dim = static_cast<int>(pick(rng, 2, 32));
    const auto model = dg::toygpt::build_toy(rng.next(), vocab, dim);
    dg::SessionContext session("a4", rng.next());
    const std::vector<dg::PrefixItem> context{dg::Discrete{static_cast<dg::TokenId>(pick(rng, 0, vocab - 1))}};
    const int length = static_cast<int>(pick(rng, 1, 8));
    std::vector<dg::PrefixItem> running = context;
    std::vector<dg::StepRecord> records;
    dg::SamplingParams sampling;
    sampling.top_k = 0;
    sampling.top_p = 1.0;
    for (int t = 0; t < length; ++t) {
      records.push_back(model.step(session, running, sampling));
      running.emplace_back(dg::Discrete{records.back().token});
    }
    const auto fast = model.teacher_probs(session, context, records, sampling.temperature);
    const auto slow = oracle::sequential_teacher(model, context, records, sampling.temperature);
    for (std::size_t i = 0; i < records.size(); ++i) {
      worst = std::max(worst, std::abs(fast.probs[i] - slow[i]) / slow[i]);
    }
  }
  return {worst <= 1e-6, "max relative deviation " + sci(worst) + " over 100 cases"};
}

Verdict a5_one_hot() {
  const auto backend = fixtures::scripted(fixtures::one_hot_plan);
  const auto tmpl = *backend->default_template();
  dg::SessionContext session("a5", 1);
  const std::vector<dg::TokenId> q{fixtures::digit(3)};
  const auto t = dg::run_session(*backend, q, dg::SessionConfig{}, tmpl, session);
  const bool pass = t.kappa_a && *t.kappa_a <= 1e-12 && t.decision == dg::Decision::kAccepted &&
                    t.counts.think_tokens == 0 && t.chunks.empty() && t.draft.records.size() == 4;
  return {pass, "kappa_a = " + (t.kappa_a ? sci(*t.kappa_a) : std::string("none")) + ", decision " +
                    dg::to_string(t.decision) + ", think tokens " + std::to_string(t.counts.think_tokens)};
}

Verdict a6_trace() {
  const auto backend = fixtures::scripted(fixtures::visibility_plan);
  const auto tmpl = *backend->default_template();
  const auto config = fixtures::exact_config();
  dg::SessionContext session("a6", 1);
  const std::vector<dg::TokenId> q{fixtures::digit(1)};
  const auto t = dg::run_session(*backend, q, config, tmpl, session);

  const std::vector<double> want{0.5, -0.2, 0.5};
  bool kappas_ok = t.chunks.size() == 3;
  std::vector<int> bits;
  for (std::size_t k = 0; k < t.chunks.size(); ++k) {
    bits.push_back(t.chunks[k].visibility);
    kappas_ok = kappas_ok && t.chunks[k].kappa_r && std::abs(*t.chunks[k].kappa_r - want[k]) <= 1e-12;
  }
  bits.push_back(t.final_visibility);

  const auto layout = dg::chunk_layout(static_cast<int>(t.draft.records.size()), config.chunk_policy);
  bool starts_ok = layout.chunk_size == 2 && layout.start(1) == 11 && t.chunk_size == 2;
  int position = static_cast<int>(t.draft.records.size()) + 1;
  for (std::size_t k = 0; k < t.chunks.size(); ++k) {
    starts_ok = starts_ok && position == layout.start(static_cast<int>(k) + 1);
    position += static_cast<int>(t.chunks[k].segment.records.size());
  }

  // Replay from the serialized trace, as a reader of the trace file would.
  const auto reread = dg::transcript_from_json_line(dg::transcript_to_json_line(t));
  dg::SessionContext replay_session("a6-replay", 2);
  const auto report = dg::replay_transcript(*backend, reread, config, tmpl, replay_session);

  std::string bit_text;
  for (int b : bits) bit_text += std::to_string(b);
  const bool pass = kappas_ok && bits == std::vector<int>{0, 0, 1, 0} && starts_ok &&
                    report.all_exact() && report.kappas.size() == 4 && reread == t;
  return {pass, "bits " + bit_text + ", C = " + std::to_string(layout.chunk_size) + ", s1 = " +
                    std::to_string(layout.start(1)) + ", replayed " + std::to_string(report.kappas.size()) +
                    " scores " + (report.all_exact() ? "bit-exact" : "with mismatches")};
}

Verdict a7_monte_carlo() {
  const mx::LatentStateModel m{{0.2, 0.5, 0.3},
                               {{0.7, 0.1, 0.1, 0.1}, {0.1, 0.6, 0.2, 0.1}, {0.25, 0.25, 0.25, 0.25}},
                               std::nullopt};
  const mx::MixtureBackend backend(m);
  const std::vector<dg::PrefixItem> teacher_context{
      dg::Continuous{dg::mixed_embedding(backend.weight_distribution(), backend)}};
  dg::SamplingParams exact;
  exact.temperature = 1.0;
  exact.top_k = 0;
  exact.top_p = 1.0;
  dg::Rng state_rng(77);
  dg::SessionContext session("a7", 78);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const dg::TokenId s = dg::sample(m.weights, exact, state_rng);
    const std::vector<dg::PrefixItem> student{dg::Discrete{backend.marker_token(static_cast<std::size_t>(s))}};
    const std::vector<dg::StepRecord> records{backend.step(session, student, exact)};
    const double k = dg::kappa_hat(records, backend.teacher_probs(session, teacher_context, records, 1.0));
    sum += k;
    sum_sq += k * k;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  const double target = mx::expected_kappa(m);
  const double ref = oracle::expected_kappa(m.weights, m.per_state);
  const double z = std::abs(mean - target) / se;
  return {z <= 3.0 && std::abs(target - ref) <= 1e-12,
          "mean " + sci(mean) + " vs E[kappa] " + sci(target) + " (" + sci(z) + " standard errors)"};
}

Verdict a8_determinism() {
  const auto backend = fixtures::hashed_backend();
  const auto tmpl = *backend->default_template();
  const auto questions = fixtures::hashed_questions();
  auto config = fixtures::hashed_config();

  const auto run_all = [&](double tau_a) {
    config.tau_a = tau_a;
    std::vector<std::string> lines;
    std::set<std::size_t> flagged;
    for (std::size_t i = 0; i < questions.size(); ++i) {
      dg::SessionContext session("a8-" + std::to_string(i), 1000 + i);
      const auto t = dg::run_session(*backend, questions[i], config, tmpl, session);
      lines.push_back(dg::transcript_to_json_line(t));
      if (t.decision == dg::Decision::kThinkTriggered) flagged.insert(i);
    }
    return std::make_pair(lines, flagged);
  };
  const auto [first, loose] = run_all(0.1);
  const auto [second, loose_again] = run_all(0.1);
  const auto [strict_lines, strict] = run_all(0.5);
  const bool identical = first == second && loose == loose_again;
  const bool subset = std::includes(loose.begin(), loose.end(), strict.begin(), strict.end());
  return {identical && subset && strict.size() < loose.size(),
          std::string("repeat run ") + (identical ? "byte-identical" : "differs") + "; flagged " +
              std::to_string(loose.size()) + " at tau_a 0.1, " + std::to_string(strict.size()) +
              " at 0.5, " + (subset ? "nested" : "not nested")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"A1 expected kappa equals mutual information", a1_identity},
      {"A2 harmless uncertainty, stability bound, deterministic answers", a2_corollaries},
      {"A3 draft score unbiased for sequence KL", a3_unbiased},
      {"A4 single-pass teacher equals sequential", a4_teacher},
      {"A5 one-hot drafts score zero and are accepted", a5_one_hot},
      {"A6 visibility trace and bit-exact replay", a6_trace},
      {"A7 Monte Carlo mean matches expected kappa", a7_monte_carlo},
      {"A8 determinism and monotone gate", a8_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
  }
  std::fflush(stdout);
  return failures == 0 ? 0 : 1;
}
