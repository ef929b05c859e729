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


#include <benchmark/benchmark.h>

#include <vector>

#include "draftgate/controller.h"
#include "draftgate/estimators.h"
#include "draftgate/mixture.h"
#include "draftgate/toygpt.h"

namespace dg = draftgate;

namespace {

std::vector<dg::StepRecord> toy_records(const dg::Backend& model, const std::vector<dg::PrefixItem>& ctx,
                                        int n) {
  dg::SessionContext s("bench", 1);
  std::vector<dg::PrefixItem> prefix = ctx;
  std::vector<dg::StepRecord> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(model.step(s, prefix, {}));
    prefix.emplace_back(dg::Discrete{out.back().token});
  }
  return out;
}

void BM_KappaHat(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<dg::StepRecord> records;
  std::vector<double> teacher;
  for (std::size_t i = 0; i < n; ++i) {
    records.push_back(dg::make_step_record(1, 0.3 + 0.5 * static_cast<double>(i % 7) / 7.0, {}));
    teacher.push_back(0.2 + 0.6 * static_cast<double>(i % 5) / 5.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(dg::kappa_hat(records, teacher));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KappaHat)->Range(16, 4096);

// Toy teacher: single causal pass against the position-by-position default.
void BM_ToyTeacherSinglePass(benchmark::State& state) {
  const auto model = dg::toygpt::build_toy(7, 64, 16);
  const auto ctx = dg::discrete_items(std::vector<dg::TokenId>{1, 2, 3, 4});
  const auto records = toy_records(model, ctx, static_cast<int>(state.range(0)));
  dg::SessionContext s("bench", 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.teacher_probs(s, ctx, records, 0.6));
}
BENCHMARK(BM_ToyTeacherSinglePass)->RangeMultiplier(4)->Range(8, 512);

void BM_ToyTeacherSequential(benchmark::State& state) {
  const auto model = dg::toygpt::build_toy(7, 64, 16);
  const auto ctx = dg::discrete_items(std::vector<dg::TokenId>{1, 2, 3, 4});
  const auto records = toy_records(model, ctx, static_cast<int>(state.range(0)));
  dg::SessionContext s("bench", 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.Backend::teacher_probs(s, ctx, records, 0.6));
}
BENCHMARK(BM_ToyTeacherSequential)->RangeMultiplier(4)->Range(8, 512);

void BM_ExpectedKappa(benchmark::State& state) {
  const auto m = dg::mixture::random_model(3, static_cast<std::size_t>(state.range(0)), 32, 0.001);
  for (auto _ : state) benchmark::DoNotOptimize(dg::mixture::expected_kappa(m));
}
BENCHMARK(BM_ExpectedKappa)->Range(4, 256);

void BM_MutualInformation(benchmark::State& state) {
  const auto m = dg::mixture::random_model(3, static_cast<std::size_t>(state.range(0)), 32, 0.001);
  for (auto _ : state) benchmark::DoNotOptimize(dg::mixture::mutual_information(m));
}
BENCHMARK(BM_MutualInformation)->Range(4, 256);

void BM_RunSession(benchmark::State& state) {
  const auto model = dg::toygpt::build_toy(7, 64, 16);
  const auto tmpl = *model.default_template();
  const auto question = *model.tokenize("12+34=");
  dg::SessionConfig config;
  config.max_draft_len = static_cast<int>(state.range(0));
  config.max_think_budget = 4 * config.max_draft_len;
  config.max_final_len = config.max_draft_len;
  config.tau_a = state.range(1) ? -1e9 : 1e9;  // force or skip thinking
  std::uint64_t seed = 0;
  for (auto _ : state) {
    dg::SessionContext s("bench", ++seed);
    benchmark::DoNotOptimize(dg::run_session(model, question, config, tmpl, s));
  }
}
BENCHMARK(BM_RunSession)->ArgsProduct({{16, 64}, {0, 1}})->ArgNames({"draft", "think"});

}  // namespace

// The packaged benchmark_main archive is built with a different LTO version.
BENCHMARK_MAIN();
