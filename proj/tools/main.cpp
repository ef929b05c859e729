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

// draftgate: run sessions, benchmark task files, sweep thresholds, self-check
// the estimators and serve a local backend over the remote protocol.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "draftgate/controller.h"
#include "draftgate/errors.h"
#include "draftgate/harness.h"
#include "draftgate/remote.h"
#include "draftgate/toygpt.h"
#include "draftgate/transcript_io.h"
#include "draftgate/version.h"

namespace dg = draftgate;

namespace {

constexpr const char* kEndpointEnv = "DRAFTGATE_ENDPOINT";

struct BackendFlags {
  std::string kind = "toy";
  std::uint64_t toy_seed = 7;
  int vocab = dg::toygpt::kMaxVocab;
  int dim = 16;
  std::string endpoint;
  int timeout_ms = 30000;

  void add(CLI::App* app) {
    app->add_option("--backend", kind, "toy or remote")->check(CLI::IsMember({"toy", "remote"}));
    app->add_option("--toy-seed", toy_seed, "Weight seed of the toy model");
    app->add_option("--vocab", vocab, "Toy vocabulary size")->check(CLI::Range(2, dg::toygpt::kMaxVocab));
    app->add_option("--dim", dim, "Toy embedding width")->check(CLI::Range(1, dg::toygpt::kMaxDim));
    app->add_option("--endpoint", endpoint, "Remote server URL")->envname(kEndpointEnv);
    app->add_option("--timeout-ms", timeout_ms, "Remote request timeout");
  }

  std::unique_ptr<dg::Backend> make() const {
    if (kind == "remote") {
      if (endpoint.empty()) {
        throw dg::InvalidArgument(std::string("remote backend needs --endpoint or ") + kEndpointEnv);
      }
      return dg::remote::connect(endpoint, {std::chrono::milliseconds(timeout_ms)});
    }
    return std::make_unique<dg::toygpt::ToyModel>(toy_seed, vocab, dim);
  }
};

// SessionConfig from an optional JSON file, then individual flag overrides.
struct ConfigFlags {
  std::string file;
  std::optional<double> tau_a, tau_r, temperature, top_p, min_p;
  std::optional<int> max_draft_len, max_think_budget, max_final_len, chunk_size, top_k;
  std::optional<std::string> granularity;
  bool greedy = false;
  bool first_chunk_visible = false;

  void add(CLI::App* app) {
    app->add_option("--config", file, "JSON file with SessionConfig keys")->check(CLI::ExistingFile);
    app->add_option("--tau-a", tau_a, "Draft threshold; think iff kappa_a > tau_a");
    app->add_option("--tau-r", tau_r, "Visibility threshold; show draft iff kappa_r < tau_r");
    app->add_option("--max-draft-len", max_draft_len);
    app->add_option("--max-think-budget", max_think_budget);
    app->add_option("--max-final-len", max_final_len);
    app->add_option("--chunk-size", chunk_size, "Fixed chunk size; 0 keeps the default rule");
    app->add_option("--temperature", temperature);
    app->add_option("--top-k", top_k);
    app->add_option("--top-p", top_p);
    app->add_option("--min-p", min_p);
    app->add_flag("--greedy", greedy, "Argmax decoding");
    app->add_option("--granularity", granularity)
        ->check(CLI::IsMember({"whole_draft", "answer_span"}));
    app->add_flag("--first-chunk-visible", first_chunk_visible);
  }

  dg::SessionConfig resolve() const {
    dg::SessionConfig c;
    if (!file.empty()) {
      std::ifstream in(file);
      std::stringstream buf;
      buf << in.rdbuf();
      c = dg::harness::config_from_json(buf.str());
    }
    if (tau_a) c.tau_a = *tau_a;
    if (tau_r) c.tau_r = *tau_r;
    if (max_draft_len) c.max_draft_len = *max_draft_len;
    if (max_think_budget) c.max_think_budget = *max_think_budget;
    if (max_final_len) c.max_final_len = *max_final_len;
    if (chunk_size) {
      c.chunk_policy = *chunk_size == 0 ? dg::ChunkPolicy::default_rule()
                                        : dg::ChunkPolicy::fixed(*chunk_size);
    }
    if (temperature) c.sampling.temperature = *temperature;
    if (top_k) c.sampling.top_k = *top_k;
    if (top_p) c.sampling.top_p = *top_p;
    if (min_p) c.sampling.min_p = *min_p;
    if (greedy) c.sampling.greedy = true;
    if (granularity) {
      c.granularity.kind = *granularity == "answer_span" ? dg::Granularity::Kind::kAnswerSpan
                                                         : dg::Granularity::Kind::kWholeDraft;
    }
    if (first_chunk_visible) c.first_chunk_visible = true;
    dg::validate_session_config(c);
    return c;
  }
};

dg::Template template_of(const dg::Backend& backend) {
  auto t = backend.default_template();
  if (!t) throw dg::InvalidArgument("backend does not provide a chat template");
  return *t;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

int cmd_run(const BackendFlags& bf, const ConfigFlags& cf, const std::string& prompt,
            const std::vector<dg::TokenId>& tokens, const std::string& mode, std::uint64_t seed,
            const std::string& trace_out) {
  const auto backend = bf.make();
  const auto config = cf.resolve();
  const auto tmpl = template_of(*backend);
  dg::harness::TaskRecord task;
  task.id = "run";
  task.checker = dg::harness::CheckerKind::kNone;
  if (!tokens.empty()) {
    task.prompt_tokens = tokens;
  } else {
    task.prompt_text = prompt;
  }
  const auto question = dg::harness::prompt_tokens(task, *backend);
  dg::SessionContext session("run-" + std::to_string(seed), seed);
  const auto t = mode == "cot" ? dg::run_cot_session(*backend, question, config, tmpl, session)
                               : dg::run_session(*backend, question, config, tmpl, session);

  const auto pieces = dg::vocabulary_pieces(*backend);
  std::cout << dg::render_transcript(t, pieces ? &*pieces : nullptr);
  const std::string line = dg::transcript_to_json_line(t);
  if (trace_out.empty()) {
    std::cout << line << '\n';
  } else {
    std::ofstream out(trace_out, std::ios::app);
    out << line << '\n';
    if (!out) throw dg::Error("cannot write " + trace_out);
  }
  return 0;
}

int cmd_bench(const BackendFlags& bf, const ConfigFlags& cf, const std::string& tasks_file,
              const std::string& mode, const std::string& tau_a_grid,
              const std::string& tau_r_grid, std::uint64_t seed, int jobs, int repeats,
              const std::string& out_prefix) {
  const auto backend = bf.make();
  std::ifstream in(tasks_file);
  if (!in) throw dg::InvalidArgument("cannot open " + tasks_file);
  const auto file = dg::harness::load_tasks(in);
  for (const auto& e : file.errors) std::cerr << tasks_file << ": " << e << '\n';

  dg::harness::BenchOptions options;
  options.mode = mode == "cot" ? dg::SessionMode::kCot : dg::SessionMode::kCopt;
  options.config = cf.resolve();
  options.tmpl = template_of(*backend);
  options.seed = seed;
  options.jobs = jobs;
  options.repeats = repeats;
  const auto points = dg::harness::run_sweep(*backend, file.tasks, options, parse_grid(tau_a_grid),
                                             parse_grid(tau_r_grid));

  std::ofstream jsonl(out_prefix + ".jsonl");
  jsonl << dg::harness::reproducibility_header(*backend, options) << '\n';
  for (const auto& p : points) {
    for (const auto& o : p.outcomes) {
      jsonl << dg::harness::outcome_to_json_line(o, p.metrics.tau_a, p.metrics.tau_r) << '\n';
    }
    jsonl << dg::harness::metrics_to_json_line(p.metrics) << '\n';
  }
  std::ofstream csv(out_prefix + ".csv");
  dg::harness::write_metrics_csv(csv, points);
  if (!jsonl || !csv) throw dg::Error("cannot write outputs under " + out_prefix);

  for (const auto& p : points) std::cout << dg::harness::metrics_to_json_line(p.metrics) << '\n';
  std::cout << "wrote " << out_prefix << ".jsonl and " << out_prefix << ".csv";
  if (!file.errors.empty()) std::cout << " (" << file.errors.size() << " malformed task lines)";
  std::cout << '\n';
  return 0;
}

int cmd_validate(const std::string& suite, const std::string& endpoint) {
  std::vector<std::pair<std::string, std::vector<dg::harness::CheckResult>>> reports;
  if (suite == "theory" || suite == "all") reports.emplace_back("theory", dg::harness::validate_theory());
  if (suite == "estimators" || suite == "all") {
    reports.emplace_back("estimators", dg::harness::validate_estimators());
  }
  if (suite == "protocol" || suite == "all") {
    reports.emplace_back("protocol", dg::harness::validate_protocol(endpoint));
  }
  bool ok = true;
  for (const auto& [name, results] : reports) {
    for (const auto& r : results) {
      const char* status = r.skipped ? "SKIP" : r.passed ? "PASS" : "FAIL";
      std::cout << status << "  [" << name << "] " << r.name << ": " << r.detail << '\n';
    }
    ok = ok && dg::harness::all_passed(results);
  }
  return ok ? 0 : 1;
}

int cmd_trace(const std::string& path, const BackendFlags* pieces_from) {
  std::ifstream in(path);
  if (!in) throw dg::InvalidArgument("cannot open " + path);
  std::optional<std::vector<std::string>> pieces;
  if (pieces_from) pieces = dg::vocabulary_pieces(*pieces_from->make());
  const auto traces = dg::read_trace(in);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    dg::transcript_counts(traces[i]);
    std::cout << "# session " << i + 1 << '\n'
              << dg::render_transcript(traces[i], pieces ? &*pieces : nullptr);
  }
  return 0;
}

int cmd_serve(const BackendFlags& bf, const std::string& host, int port) {
  const auto backend = bf.make();
  dg::remote::ProtocolServer server(*backend);
  std::cout << "serving " << backend->info().identifier << " on " << host << ':' << port
            << std::endl;
  server.serve(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Draft-gated reasoning controller"};
  app.set_version_flag("--version", std::string(dg::kVersion));
  app.require_subcommand(1);

  BackendFlags run_backend, bench_backend, serve_backend, trace_backend;
  ConfigFlags run_config, bench_config;

  auto* run = app.add_subcommand("run", "Run one session and print its trace");
  run_backend.add(run);
  run_config.add(run);
  std::string prompt, run_mode = "copt", trace_out;
  std::vector<dg::TokenId> tokens;
  std::uint64_t run_seed = 0;
  auto* prompt_opt = run->add_option("--prompt", prompt, "Raw-text question");
  auto* tokens_opt = run->add_option("--tokens", tokens, "Pre-tokenized question")->delimiter(',');
  prompt_opt->excludes(tokens_opt);
  run->add_option("--mode", run_mode)->check(CLI::IsMember({"copt", "cot"}));
  run->add_option("--seed", run_seed, "Session seed");
  run->add_option("--trace-out", trace_out, "Append the JSON trace line here instead of stdout");

  auto* bench = app.add_subcommand("bench", "Run a task file, optionally sweeping thresholds");
  bench_backend.add(bench);
  bench_config.add(bench);
  std::string tasks_file, bench_mode = "copt", tau_a_grid, tau_r_grid, out_prefix = "draftgate_run";
  std::uint64_t bench_seed = 0;
  int jobs = 1, repeats = 1;
  bench->add_option("tasks", tasks_file, "Line-delimited JSON task file")->required();
  bench->add_option("--mode", bench_mode)->check(CLI::IsMember({"copt", "cot"}));
  bench->add_option("--sweep-tau-a", tau_a_grid, "Comma-separated tau_a grid");
  bench->add_option("--sweep-tau-r", tau_r_grid, "Comma-separated tau_r grid");
  bench->add_option("--seed", bench_seed, "Run seed; task seeds derive from it and the task id");
  bench->add_option("--jobs", jobs, "Concurrent sessions")->check(CLI::PositiveNumber);
  bench->add_option("--repeat", repeats, "Repetitions per task")->check(CLI::PositiveNumber);
  bench->add_option("--out", out_prefix, "Output prefix for .jsonl and .csv");

  auto* validate = app.add_subcommand("validate", "Run the self-check suites");
  std::string suite = "all", validate_endpoint;
  validate->add_option("--suite", suite)
      ->check(CLI::IsMember({"theory", "estimators", "protocol", "all"}));
  validate->add_option("--endpoint", validate_endpoint, "Server for the protocol suite")
      ->envname(kEndpointEnv);

  auto* trace = app.add_subcommand("trace", "Pretty-print a saved trace file");
  std::string trace_file;
  trace->add_option("file", trace_file)->required()->check(CLI::ExistingFile);
  trace_backend.add(trace);
  bool trace_pieces = false;
  trace->add_flag("--pieces", trace_pieces, "Render token text using the backend vocabulary");

  auto* serve = app.add_subcommand("serve", "Serve a local backend over the remote protocol");
  serve_backend.add(serve);
  std::string host = "127.0.0.1";
  int port = 8765;
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; any usage error maps to 2.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      if (prompt.empty() && tokens.empty()) throw dg::InvalidArgument("--prompt or --tokens required");
      return cmd_run(run_backend, run_config, prompt, tokens, run_mode, run_seed, trace_out);
    }
    if (*bench) {
      return cmd_bench(bench_backend, bench_config, tasks_file, bench_mode, tau_a_grid, tau_r_grid,
                       bench_seed, jobs, repeats, out_prefix);
    }
    if (*validate) return cmd_validate(suite, validate_endpoint);
    if (*trace) return cmd_trace(trace_file, trace_pieces ? &trace_backend : nullptr);
    if (*serve) {
      if (serve_backend.kind == "remote") throw dg::InvalidArgument("serve needs a local backend");
      return cmd_serve(serve_backend, host, port);
    }
  } catch (const dg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
