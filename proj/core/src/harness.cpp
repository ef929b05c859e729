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

#include "draftgate/harness.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "draftgate/controller.h"
#include "draftgate/errors.h"
#include "draftgate/estimators.h"
#include "draftgate/mixture.h"
#include "draftgate/remote.h"
#include "draftgate/toygpt.h"
#include "draftgate/version.h"
#include "json.hpp"

namespace draftgate::harness {
namespace {

using nlohmann::json;

json config_json(const SessionConfig& c) {
  return {{"tau_a", c.tau_a},
          {"tau_r", c.tau_r},
          {"max_draft_len", c.max_draft_len},
          {"max_think_budget", c.max_think_budget},
          {"max_final_len", c.max_final_len},
          {"chunk_size",
           c.chunk_policy.kind == ChunkPolicy::Kind::kFixed ? c.chunk_policy.fixed_size : 0},
          {"temperature", c.sampling.temperature},
          {"top_k", c.sampling.top_k},
          {"top_p", c.sampling.top_p},
          {"min_p", c.sampling.min_p},
          {"greedy", c.sampling.greedy},
          {"granularity",
           c.granularity.kind == Granularity::Kind::kAnswerSpan ? "answer_span" : "whole_draft"},
          {"span_open", c.granularity.pattern.open},
          {"span_close", c.granularity.pattern.close},
          {"first_chunk_visible", c.first_chunk_visible}};
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

std::string config_to_json(const SessionConfig& config) { return config_json(config).dump(); }

SessionConfig config_from_json(std::string_view text, SessionConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "tau_a") {
        c.tau_a = v.get<double>();
      } else if (key == "tau_r") {
        c.tau_r = v.get<double>();
      } else if (key == "max_draft_len") {
        c.max_draft_len = v.get<int>();
      } else if (key == "max_think_budget") {
        c.max_think_budget = v.get<int>();
      } else if (key == "max_final_len") {
        c.max_final_len = v.get<int>();
      } else if (key == "chunk_size") {
        const int size = v.get<int>();
        c.chunk_policy = size == 0 ? ChunkPolicy::default_rule() : ChunkPolicy::fixed(size);
      } else if (key == "temperature") {
        c.sampling.temperature = v.get<double>();
      } else if (key == "top_k") {
        c.sampling.top_k = v.get<int>();
      } else if (key == "top_p") {
        c.sampling.top_p = v.get<double>();
      } else if (key == "min_p") {
        c.sampling.min_p = v.get<double>();
      } else if (key == "greedy") {
        c.sampling.greedy = v.get<bool>();
      } else if (key == "granularity") {
        const auto g = v.get<std::string>();
        if (g == "whole_draft") {
          c.granularity.kind = Granularity::Kind::kWholeDraft;
        } else if (g == "answer_span") {
          c.granularity.kind = Granularity::Kind::kAnswerSpan;
        } else {
          throw InvalidArgument("granularity must be whole_draft or answer_span");
        }
      } else if (key == "span_open") {
        c.granularity.pattern.open = v.get<std::string>();
      } else if (key == "span_close") {
        c.granularity.pattern.close = v.get<std::string>();
      } else if (key == "first_chunk_visible") {
        c.first_chunk_visible = v.get<bool>();
      } else {
        throw InvalidArgument("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config value has the wrong type: ") + e.what());
  }
  validate_session_config(c);
  return c;
}

const char* to_string(CheckerKind k) {
  switch (k) {
    case CheckerKind::kExact:
      return "exact";
    case CheckerKind::kBoxed:
      return "boxed";
    case CheckerKind::kNone:
      return "none";
  }
  return "none";
}

CheckerKind checker_from_string(std::string_view s) {
  for (auto k : {CheckerKind::kExact, CheckerKind::kBoxed, CheckerKind::kNone}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidArgument("unknown checker '" + std::string(s) + "'");
}

TaskRecord parse_task(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw InvalidArgument("not valid JSON");
  }
  if (!j.is_object()) throw InvalidArgument("task must be a JSON object");
  TaskRecord t;
  try {
    t.id = j.at("id").get<std::string>();
    if (j.contains("prompt_tokens")) t.prompt_tokens = j.at("prompt_tokens").get<std::vector<TokenId>>();
    if (j.contains("prompt")) t.prompt_text = j.at("prompt").get<std::string>();
    if (j.contains("expected") && !j.at("expected").is_null()) {
      t.expected = j.at("expected").get<std::string>();
    }
    t.checker = checker_from_string(j.value("checker", std::string("boxed")));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad field: ") + e.what());
  }
  if (t.id.empty()) throw InvalidArgument("empty task id");
  if (t.prompt_tokens.has_value() == t.prompt_text.has_value()) {
    throw InvalidArgument("exactly one of prompt_tokens and prompt is required");
  }
  if (t.prompt_tokens && t.prompt_tokens->empty()) throw InvalidArgument("empty prompt_tokens");
  if (t.checker != CheckerKind::kNone && !t.expected) {
    throw InvalidArgument("expected answer required for checker " +
                          std::string(to_string(t.checker)));
  }
  return t;
}

std::string task_to_json_line(const TaskRecord& t) {
  json j = {{"id", t.id}, {"checker", to_string(t.checker)}};
  if (t.prompt_tokens) j["prompt_tokens"] = *t.prompt_tokens;
  if (t.prompt_text) j["prompt"] = *t.prompt_text;
  if (t.expected) j["expected"] = *t.expected;
  return j.dump();
}

TaskFile load_tasks(std::istream& in) {
  TaskFile out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      out.tasks.push_back(parse_task(line));
    } catch (const InvalidArgument& e) {
      out.errors.push_back("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TokenId> prompt_tokens(const TaskRecord& task, const Backend& backend) {
  if (task.prompt_tokens) return *task.prompt_tokens;
  auto tokens = backend.tokenize(*task.prompt_text);
  if (!tokens) {
    throw InvalidArgument("task '" + task.id +
                          "' has a raw-text prompt but the backend cannot tokenize it");
  }
  if (tokens->empty()) throw InvalidArgument("task '" + task.id + "' tokenizes to nothing");
  return *tokens;
}

std::optional<std::string> last_boxed(std::string_view text) {
  constexpr std::string_view kOpen = "\\boxed{";
  const auto at = text.rfind(kOpen);
  if (at == std::string_view::npos) return std::nullopt;
  int depth = 1;
  const std::size_t body = at + kOpen.size();
  for (std::size_t i = body; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return std::string(text.substr(body, i - body));
  }
  return std::nullopt;
}

std::string normalize_answer(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  }
  std::string out;
  for (std::size_t i = 0; i < compact.size();) {
    const auto digit = [&](std::size_t k) {
      return k < compact.size() && std::isdigit(static_cast<unsigned char>(compact[k]));
    };
    const bool run_start = digit(i) && (i == 0 || (!digit(i - 1) && compact[i - 1] != '.'));
    if (!run_start) {
      out.push_back(compact[i++]);
      continue;
    }
    std::size_t end = i;
    while (digit(end)) ++end;
    std::size_t first = i;
    while (first + 1 < end && compact[first] == '0') ++first;
    out.append(compact, first, end - first);
    i = end;
  }
  return out;
}

std::optional<bool> check_answer(CheckerKind kind, std::string_view output,
                                 std::string_view expected) {
  switch (kind) {
    case CheckerKind::kNone:
      return std::nullopt;
    case CheckerKind::kExact:
      return normalize_answer(output) == normalize_answer(expected);
    case CheckerKind::kBoxed: {
      const auto boxed = last_boxed(output);
      return boxed && normalize_answer(*boxed) == normalize_answer(expected);
    }
  }
  return std::nullopt;
}

RunMetrics compute_metrics(const std::vector<TaskOutcome>& outcomes, double tau_a, double tau_r) {
  RunMetrics m;
  m.tau_a = tau_a;
  m.tau_r = tau_r;
  m.tasks = outcomes.size();
  std::size_t checked = 0, correct = 0, accepted_checked = 0, accepted_correct = 0,
              flagged_checked = 0, tokens = 0, ran = 0;
  for (const auto& o : outcomes) {
    if (!o.error.empty()) {
      ++m.failed;
      continue;
    }
    ++ran;
    tokens += o.transcript.counts.total;
    const bool flagged = o.transcript.decision == Decision::kThinkTriggered;
    flagged ? ++m.flagged : ++m.accepted;
    if (o.correct) {
      ++checked;
      correct += *o.correct ? 1 : 0;
    }
    if (!o.draft_correct) continue;
    if (flagged) {
      ++flagged_checked;
      if (!*o.draft_correct) {
        ++m.caught_errors;
        if (o.correct.value_or(false)) ++m.corrected_errors;
      }
    } else {
      ++accepted_checked;
      accepted_correct += *o.draft_correct ? 1 : 0;
    }
  }
  m.accuracy = checked ? static_cast<double>(correct) / static_cast<double>(checked) : 0.0;
  m.mean_tokens = ran ? static_cast<double>(tokens) / static_cast<double>(ran) : 0.0;
  if (flagged_checked) {
    m.precision = static_cast<double>(m.caught_errors) / static_cast<double>(flagged_checked);
  }
  if (accepted_checked) {
    m.safe_acceptance =
        static_cast<double>(accepted_correct) / static_cast<double>(accepted_checked);
  }
  return m;
}

std::uint64_t task_seed(std::uint64_t run_seed, std::string_view task_id, int repeat) {
  // FNV-1a over the id, then mixed with the run seed and repeat index.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : task_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= run_seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(repeat) * 0xbf58476d1ce4e5b9ULL;
  return h;
}

TaskOutcome run_task(const Backend& backend, const TaskRecord& task, const BenchOptions& options,
                     int repeat) {
  TaskOutcome o;
  o.id = task.id;
  o.repeat = repeat;
  o.seed = task_seed(options.seed, task.id, repeat);
  try {
    const auto question = prompt_tokens(task, backend);
    SessionContext session(task.id + "#" + std::to_string(repeat) + "@" + std::to_string(o.seed),
                           o.seed);
    o.transcript = options.mode == SessionMode::kCot
                       ? run_cot_session(backend, question, options.config, options.tmpl, session)
                       : run_session(backend, question, options.config, options.tmpl, session);
    transcript_counts(o.transcript);
  } catch (const Error& e) {
    o.error = e.what();
    return o;
  }
  o.answer_text = detokenize(backend, tokens_of(o.transcript.answer_records()));
  if (task.checker != CheckerKind::kNone) {
    o.correct = check_answer(task.checker, o.answer_text, *task.expected);
    if (o.transcript.mode == SessionMode::kCopt) {
      o.draft_correct = check_answer(
          task.checker, detokenize(backend, tokens_of(o.transcript.draft.records)), *task.expected);
    }
  }
  return o;
}

std::vector<TaskOutcome> run_tasks(const Backend& backend, const std::vector<TaskRecord>& tasks,
                                   const BenchOptions& options) {
  if (options.jobs < 1) throw InvalidArgument("jobs must be at least 1");
  if (options.repeats < 1) throw InvalidArgument("repeats must be at least 1");
  const std::size_t total = tasks.size() * static_cast<std::size_t>(options.repeats);
  std::vector<TaskOutcome> out(total);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t task = i / static_cast<std::size_t>(options.repeats);
      const int repeat = static_cast<int>(i % static_cast<std::size_t>(options.repeats));
      out[i] = run_task(backend, tasks[task], options, repeat);
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), total);
  if (n <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

std::vector<SweepPoint> run_sweep(const Backend& backend, const std::vector<TaskRecord>& tasks,
                                  const BenchOptions& options, const std::vector<double>& tau_a,
                                  const std::vector<double>& tau_r) {
  std::vector<SweepPoint> points;
  if (options.mode == SessionMode::kCot) {
    auto outcomes = run_tasks(backend, tasks, options);
    points.push_back({compute_metrics(outcomes, options.config.tau_a, options.config.tau_r),
                      std::move(outcomes)});
    return points;
  }
  const std::vector<double> as = tau_a.empty() ? std::vector{options.config.tau_a} : tau_a;
  const std::vector<double> rs = tau_r.empty() ? std::vector{options.config.tau_r} : tau_r;
  for (double a : as) {
    for (double r : rs) {
      BenchOptions point = options;
      point.config.tau_a = a;
      point.config.tau_r = r;
      auto outcomes = run_tasks(backend, tasks, point);
      points.push_back({compute_metrics(outcomes, a, r), std::move(outcomes)});
    }
  }
  return points;
}

std::string reproducibility_header(const Backend& backend, const BenchOptions& options) {
  return json{{"kind", "header"},
              {"version", kVersion},
              {"protocol_version", remote::kProtocolVersion},
              {"backend", backend.info().identifier},
              {"mode", to_string(options.mode)},
              {"seed", options.seed},
              {"jobs", options.jobs},
              {"repeats", options.repeats},
              {"config", config_json(options.config)}}
      .dump();
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_json(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string metrics_to_json_line(const RunMetrics& m) {
  return json{{"kind", "metrics"},
              {"tau_a", m.tau_a},
              {"tau_r", m.tau_r},
              {"tasks", m.tasks},
              {"failed", m.failed},
              {"flagged", m.flagged},
              {"accepted", m.accepted},
              {"accuracy", m.accuracy},
              {"mean_tokens", m.mean_tokens},
              {"caught_errors", m.caught_errors},
              {"precision", optional_json(m.precision)},
              {"safe_acceptance", optional_json(m.safe_acceptance)},
              {"corrected_errors", m.corrected_errors}}
      .dump();
}

std::string outcome_to_json_line(const TaskOutcome& o, double tau_a, double tau_r) {
  const auto& t = o.transcript;
  json j = {{"kind", "task"},
            {"id", o.id},
            {"repeat", o.repeat},
            {"seed", o.seed},
            {"tau_a", tau_a},
            {"tau_r", tau_r}};
  if (!o.error.empty()) {
    j["error"] = o.error;
    return j.dump();
  }
  j["decision"] = to_string(t.decision);
  j["status"] = to_string(t.status);
  j["kappa_a"] = optional_json(t.kappa_a);
  j["chunks"] = t.chunks.size();
  j["draft_correct"] = optional_json(o.draft_correct);
  j["correct"] = optional_json(o.correct);
  j["draft_tokens"] = t.counts.draft_tokens;
  j["think_tokens"] = t.counts.think_tokens;
  j["total_tokens"] = t.counts.total;
  j["answer"] = o.answer_text;
  return j.dump();
}

void write_metrics_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  const auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream os;
    os.precision(17);
    os << *v;
    return os.str();
  };
  out << "tau_a,tau_r,tasks,failed,flagged,accepted,accuracy,mean_tokens,caught_errors,"
         "precision,safe_acceptance,corrected_errors\n";
  for (const auto& p : points) {
    const auto& m = p.metrics;
    out << opt(m.tau_a) << ',' << opt(m.tau_r) << ',' << m.tasks << ',' << m.failed << ','
        << m.flagged << ',' << m.accepted << ',' << opt(m.accuracy) << ',' << opt(m.mean_tokens)
        << ',' << m.caught_errors << ',' << opt(m.precision) << ',' << opt(m.safe_acceptance)
        << ',' << m.corrected_errors << '\n';
  }
}

// ---------------------------------------------------------------- validate

namespace {

CheckResult bounded(std::string name, double deviation, double tolerance) {
  std::ostringstream os;
  os.precision(3);
  os << "max deviation " << deviation << " (tolerance " << tolerance << ")";
  return {std::move(name), deviation <= tolerance, false, os.str()};
}

double sequence_kl_gap(std::uint64_t seed, int length) {
  const auto model = toygpt::build_toy(seed, 4, 4);
  const std::vector<PrefixItem> context{Discrete{0}};
  const double temperature = 1.0;
  double expected_kappa = 0.0, kl = 0.0;
  for (const auto& seq : toygpt::enumerate_sequences(model, context, length, temperature)) {
    std::vector<StepRecord> records;
    std::vector<PrefixItem> discrete = context;
    std::vector<PrefixItem> soft = context;
    double log_ratio = 0.0;
    for (TokenId tok : seq.tokens) {
      const auto p = apply_temperature(model.next_distribution(discrete), temperature);
      const auto q = apply_temperature(model.next_distribution(soft), temperature);
      log_ratio += std::log(p[static_cast<std::size_t>(tok)]) -
                   std::log(q[static_cast<std::size_t>(tok)]);
      records.push_back(make_step_record(tok, p[static_cast<std::size_t>(tok)],
                                         mixed_embedding(p, model)));
      discrete.emplace_back(Discrete{tok});
      soft.emplace_back(Continuous{records.back().embedding});
    }
    SessionContext session("validate", seed);
    const auto teacher = model.teacher_probs(session, context, records, temperature);
    expected_kappa += seq.probability * kappa_hat(records, teacher);
    kl += seq.probability * log_ratio;
  }
  return std::abs(expected_kappa - kl / length);
}

}  // namespace

std::vector<CheckResult> validate_theory(std::uint64_t seed, int models) {
  std::vector<CheckResult> out;
  Rng rng(seed);
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
  };

  double gap = 0.0;
  for (int i = 0; i < models; ++i) {
    const auto m = mixture::random_model(rng.next(), pick(2, 8), pick(2, 16), 0.01);
    gap = std::max(gap, std::abs(mixture::expected_kappa(m) - mixture::mutual_information(m)));
  }
  out.push_back(bounded("expected kappa equals mutual information over " +
                            std::to_string(models) + " mixtures",
                        gap, 1e-10));

  double harmless = 0.0;
  for (int i = 0; i < models; ++i) {
    auto m = mixture::random_model(rng.next(), pick(2, 8), pick(2, 16), 0.01);
    for (auto& p : m.per_state) p = m.per_state.front();
    for (std::size_t s = 0; s < m.num_states(); ++s) {
      for (std::size_t a = 0; a < m.num_answers(); ++a) {
        harmless = std::max(harmless, std::abs(mixture::local_kappa(m, s, a)));
      }
    }
  }
  out.push_back(bounded("identical per-state distributions give zero local kappa", harmless,
                        1e-12));

  double excess = 0.0;
  for (int i = 0; i < models; ++i) {
    const auto m = mixture::random_model(rng.next(), pick(2, 8), pick(2, 16), 0.01);
    const auto p_star = mixture::random_distribution(rng, m.num_answers(), 0.001);
    excess = std::max(excess, mixture::expected_kappa(m) - mixture::stability_bound(m, p_star));
  }
  out.push_back({"expected kappa never exceeds the stability bound", excess <= 1e-12, false,
                 "max excess " + fmt(excess)});

  double det = 0.0;
  for (int i = 0; i < models; ++i) {
    const std::size_t n_s = pick(2, 8), n_a = pick(2, 16);
    const auto w = mixture::random_distribution(rng, n_s, 0.01);
    std::vector<int> g(n_s);
    for (auto& a : g) a = static_cast<int>(pick(0, n_a - 1));
    const auto m = mixture::deterministic_model(w, g, n_a);
    det = std::max(det,
                   std::abs(mixture::expected_kappa(m) - mixture::induced_answer_entropy(m)));
  }
  const auto binary = mixture::deterministic_model({0.5, 0.5}, {0, 1}, 2);
  det = std::max(det, std::abs(mixture::expected_kappa(binary) - std::log(2.0)));
  out.push_back(bounded("deterministic answers: expected kappa equals answer entropy", det,
                        1e-12));
  return out;
}

std::vector<CheckResult> validate_estimators(std::uint64_t seed) {
  std::vector<CheckResult> out;
  double gap = 0.0;
  for (std::uint64_t s = seed; s < seed + 5; ++s) gap = std::max(gap, sequence_kl_gap(s, 3));
  out.push_back(bounded("draft score is unbiased for the per-token sequence KL", gap, 1e-9));

  double rel = 0.0;
  Rng rng(seed);
  for (int c = 0; c < 100; ++c) {
    const auto model = toygpt::build_toy(rng.next(), 8, 6);
    SessionContext session("validate", rng.next());
    std::vector<PrefixItem> context{Discrete{static_cast<TokenId>(rng.next() % 8)}};
    const int length = 1 + static_cast<int>(rng.next() % 8);
    std::vector<PrefixItem> running = context;
    std::vector<StepRecord> records;
    for (int t = 0; t < length; ++t) {
      records.push_back(model.step(session, running, SamplingParams{}));
      running.emplace_back(Discrete{records.back().token});
    }
    const auto fast = model.teacher_probs(session, context, records, 0.6);
    const auto slow = model.Backend::teacher_probs(session, context, records, 0.6);
    for (std::size_t i = 0; i < records.size(); ++i) {
      rel = std::max(rel, std::abs(fast.probs[i] - slow.probs[i]) / slow.probs[i]);
    }
  }
  out.push_back(bounded("single-pass teacher matches sequential recomputation", rel, 1e-6));
  return out;
}

std::vector<CheckResult> validate_protocol(const std::string& endpoint) {
  if (endpoint.empty()) {
    return {{"protocol", false, true, "no endpoint configured (set DRAFTGATE_ENDPOINT)"}};
  }
  std::unique_ptr<remote::RemoteBackend> backend;
  try {
    backend = remote::connect(endpoint, {std::chrono::milliseconds(3000)});
  } catch (const TransportError& e) {
    return {{"protocol", false, true, std::string("server unreachable: ") + e.what()}};
  } catch (const Error& e) {
    return {{"handshake", false, false, e.what()}};
  }
  std::vector<CheckResult> out;
  out.push_back({"handshake", true, false, backend->info().identifier});

  const auto run = [&](const std::string& name, auto&& body) {
    try {
      const std::string detail = body();
      out.push_back({name, true, false, detail});
    } catch (const std::exception& e) {
      out.push_back({name, false, false, e.what()});
    }
  };
  const std::vector<PrefixItem> context{Discrete{0}};
  const SamplingParams sampling;

  run("step returns a valid token and probability", [&] {
    SessionContext s("validate-step", 11);
    const auto r = backend->step(s, context, sampling);
    backend->end_session(s);
    if (r.embedding_handle.empty()) throw ProtocolError("no embedding handle");
    return "token " + std::to_string(r.token) + ", p = " + fmt(r.chosen_prob);
  });

  run("sampling is reproducible per session seed", [&] {
    std::vector<TokenId> a, b;
    for (auto* out_tokens : {&a, &b}) {
      SessionContext s("validate-seed-" + std::to_string(out_tokens == &a), 23);
      std::vector<PrefixItem> ctx = context;
      for (int i = 0; i < 4; ++i) {
        const auto r = backend->step(s, ctx, sampling);
        out_tokens->push_back(r.token);
        ctx.emplace_back(Discrete{r.token});
      }
      backend->end_session(s);
    }
    if (a != b) throw ProtocolError("same seed produced different tokens");
    return std::string("4 tokens identical");
  });

  run("teacher pass agrees with the step at the first position", [&] {
    SessionContext s("validate-teacher", 5);
    std::vector<PrefixItem> ctx = context;
    std::vector<StepRecord> records;
    for (int i = 0; i < 3; ++i) {
      records.push_back(backend->step(s, ctx, sampling));
      ctx.emplace_back(Discrete{records.back().token});
    }
    const auto teacher = backend->teacher_probs(s, context, records, sampling.temperature);
    backend->end_session(s);
    const double dev = std::abs(teacher.probs.front() - records.front().chosen_prob);
    if (dev > 1e-9) throw ProtocolError("first teacher probability differs by " + fmt(dev));
    return "deviation " + fmt(dev);
  });

  run("unknown handles are rejected", [&] {
    remote::TeacherRequest req;
    req.session_id = "validate-missing";
    req.context = remote::to_wire(context);
    req.tail_handles = {"validate-missing/999"};
    req.targets = {0};
    try {
      backend->remote_teacher(req);
    } catch (const RemoteError& e) {
      if (e.code() == "unknown_handle") return std::string("rejected");
      throw;
    }
    throw ProtocolError("server accepted a handle it never issued");
  });
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.passed || r.skipped; });
}

}  // namespace draftgate::harness
