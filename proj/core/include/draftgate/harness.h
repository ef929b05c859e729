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

// Benchmark harness: task files, answer checkers, batch runs with threshold
// sweeps, gate metrics and the self-check suites behind `draftgate validate`.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "draftgate/backend.h"
#include "draftgate/types.h"

namespace draftgate::harness {

// Flat JSON form of SessionConfig. Keys: tau_a, tau_r, max_draft_len,
// max_think_budget, max_final_len, chunk_size (0 selects the default rule),
// temperature, top_k, top_p, min_p, greedy, granularity ("whole_draft" or
// "answer_span"), span_open, span_close, first_chunk_visible.
std::string config_to_json(const SessionConfig& config);
// Keys absent from `text` keep their value in `base`; unknown keys throw
// InvalidArgument, as does a result failing validation.
SessionConfig config_from_json(std::string_view text, SessionConfig base = {});

enum class CheckerKind { kExact, kBoxed, kNone };

const char* to_string(CheckerKind k);
CheckerKind checker_from_string(std::string_view s);

struct TaskRecord {
  std::string id;
  // Exactly one of the two prompt forms is set.
  std::optional<std::vector<TokenId>> prompt_tokens;
  std::optional<std::string> prompt_text;
  // Present whenever checker != kNone.
  std::optional<std::string> expected;
  CheckerKind checker = CheckerKind::kBoxed;

  bool operator==(const TaskRecord&) const = default;
};

// One JSON object: {"id", "prompt_tokens" | "prompt", "expected", "checker"}.
// Throws InvalidArgument when a field is missing or inconsistent.
TaskRecord parse_task(std::string_view line);
std::string task_to_json_line(const TaskRecord& t);

struct TaskFile {
  std::vector<TaskRecord> tasks;
  // "line N: reason" for every line that failed to parse.
  std::vector<std::string> errors;
};

// Skips blank lines; malformed lines are reported, not fatal.
TaskFile load_tasks(std::istream& in);

// Prompt tokens, tokenizing raw text through the backend's hook. Throws
// InvalidArgument when the backend has no tokenizer.
std::vector<TokenId> prompt_tokens(const TaskRecord& task, const Backend& backend);

// Content of the last \boxed{...} span, braces balanced.
std::optional<std::string> last_boxed(std::string_view text);
// Strips whitespace and leading zeros of integer runs ("007" -> "7").
std::string normalize_answer(std::string_view text);
// nullopt for kNone.
std::optional<bool> check_answer(CheckerKind kind, std::string_view output,
                                 std::string_view expected);

struct TaskOutcome {
  std::string id;
  int repeat = 0;
  std::uint64_t seed = 0;
  Transcript transcript;
  std::string answer_text;
  std::optional<bool> correct;
  // Draft judged on its own; copt sessions with a checker only.
  std::optional<bool> draft_correct;
  // Failure message when the session could not run; transcript is empty.
  std::string error;
};

struct RunMetrics {
  double tau_a = 0.0;
  double tau_r = 0.0;
  std::size_t tasks = 0;
  std::size_t failed = 0;
  std::size_t flagged = 0;
  std::size_t accepted = 0;
  // Over tasks with a checker.
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  // Flagged sessions whose draft was wrong.
  std::size_t caught_errors = 0;
  // caught_errors / flagged; absent with nothing flagged.
  std::optional<double> precision;
  // Correct drafts among accepted / accepted; absent with nothing accepted.
  std::optional<double> safe_acceptance;
  // Caught errors whose final answer is correct.
  std::size_t corrected_errors = 0;
};

// Order-independent aggregation.
RunMetrics compute_metrics(const std::vector<TaskOutcome>& outcomes, double tau_a, double tau_r);

struct BenchOptions {
  SessionMode mode = SessionMode::kCopt;
  SessionConfig config;
  Template tmpl;
  std::uint64_t seed = 0;
  int jobs = 1;
  int repeats = 1;
};

// Session seed for a task: depends on the run seed, task id and repeat only.
std::uint64_t task_seed(std::uint64_t run_seed, std::string_view task_id, int repeat);

TaskOutcome run_task(const Backend& backend, const TaskRecord& task, const BenchOptions& options,
                     int repeat = 0);

// All tasks x repeats, up to options.jobs at a time; results in input order
// and independent of the parallelism.
std::vector<TaskOutcome> run_tasks(const Backend& backend, const std::vector<TaskRecord>& tasks,
                                   const BenchOptions& options);

struct SweepPoint {
  RunMetrics metrics;
  std::vector<TaskOutcome> outcomes;
};

// One point per (tau_a, tau_r) pair; cot mode ignores the grid and yields a
// single point.
std::vector<SweepPoint> run_sweep(const Backend& backend, const std::vector<TaskRecord>& tasks,
                                  const BenchOptions& options, const std::vector<double>& tau_a,
                                  const std::vector<double>& tau_r);

// {"kind":"header", config, seed, mode, backend, protocol_version, version}.
std::string reproducibility_header(const Backend& backend, const BenchOptions& options);
std::string metrics_to_json_line(const RunMetrics& m);
std::string outcome_to_json_line(const TaskOutcome& o, double tau_a, double tau_r);
// Flat CSV: one row per grid point.
void write_metrics_csv(std::ostream& out, const std::vector<SweepPoint>& points);

// ---------------------------------------------------------------- validate

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  // Measured deviation or skip reason.
  std::string detail;
};

std::vector<CheckResult> validate_theory(std::uint64_t seed = 1, int models = 1000);
std::vector<CheckResult> validate_estimators(std::uint64_t seed = 7);
// Skipped with a reason when `endpoint` is empty or unreachable.
std::vector<CheckResult> validate_protocol(const std::string& endpoint);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace draftgate::harness
