// Copyright 2026 The herdtwin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <herdtwin/gp.hpp>
#include <herdtwin/rng.hpp>
#include <herdtwin/synth.hpp>
#include <herdtwin/twin.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace herdtwin;

void BM_TwinDay(benchmark::State& state) {
  SynthConfig cfg;
  cfg.n_cows = 1;
  cfg.days = static_cast<int>(state.range(0));
  const auto frame = herd_frames(simulate_herd(cfg)).at(0);
  for (auto _ : state) benchmark::DoNotOptimize(run_twin(frame, TwinConfig{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frame.length()));
}
BENCHMARK(BM_TwinDay)->Arg(1)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_GpPushPredict(benchmark::State& state) {
  GpConfig cfg;
  cfg.window = static_cast<std::size_t>(state.range(0));
  GpResidualModel gp(cfg);
  auto rng = make_rng(5, {});
  auto draw = [&] { return gp_input(60.0 + 25.0 * uniform01(rng), 24.0 * uniform01(rng), uniform01(rng), cfg); };
  for (std::size_t i = 0; i < cfg.window; ++i) gp.push(draw(), 0.1 * standard_normal(rng));
  for (auto _ : state) {
    gp.push(draw(), 0.1 * standard_normal(rng));
    benchmark::DoNotOptimize(gp.predict(draw()));
  }
}
BENCHMARK(BM_GpPushPredict)->Arg(64)->Arg(256);

}  // namespace
