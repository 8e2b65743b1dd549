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

#include <herdtwin/features.hpp>
#include <herdtwin/rng.hpp>
#include <herdtwin/synth.hpp>

#include <benchmark/benchmark.h>

namespace {

using namespace herdtwin;

void BM_RollingStats(benchmark::State& state) {
  auto rng = make_rng(9, {});
  Series x;
  for (int i = 0; i < 20160; ++i)
    x.push_back(uniform01(rng) < 0.1 ? std::nullopt : std::optional<double>(38.6 + 0.3 * standard_normal(rng)));
  const std::vector<int> windows{static_cast<int>(state.range(0))};
  const std::vector<RollingStat> stats{RollingStat::mean, RollingStat::std, RollingStat::max, RollingStat::min,
                                       RollingStat::var, RollingStat::skew};
  for (auto _ : state) benchmark::DoNotOptimize(rolling_stats(x, "cbt", windows, stats));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_RollingStats)->Arg(15)->Arg(60)->Arg(240);

void BM_AssembleDay(benchmark::State& state) {
  SynthConfig cfg;
  cfg.n_cows = 1;
  cfg.days = 1;
  const auto frame = herd_frames(simulate_herd(cfg)).at(0);
  for (auto _ : state) benchmark::DoNotOptimize(assemble(frame));
}
BENCHMARK(BM_AssembleDay)->Unit(benchmark::kMillisecond);

}  // namespace
