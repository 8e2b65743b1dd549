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

#include <herdtwin/gbdt.hpp>
#include <herdtwin/rng.hpp>

#include <benchmark/benchmark.h>

#include <cmath>
#include <string>

namespace {

using namespace herdtwin;

DataMatrix make_matrix(std::size_t rows, std::size_t cols, std::vector<double>& y) {
  auto rng = make_rng(3, {});
  DataMatrix x;
  x.rows = rows;
  for (std::size_t c = 0; c < cols; ++c) {
    x.names.push_back("f" + std::to_string(c));
    std::vector<double> v(rows);
    for (auto& e : v) e = uniform01(rng) < 0.05 ? std::nan("") : standard_normal(rng);
    x.cols.push_back(std::move(v));
  }
  y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double a = std::isnan(x.cols[0][r]) ? 0.0 : x.cols[0][r];
    const double b = std::isnan(x.cols[1][r]) ? 0.0 : x.cols[1][r];
    y[r] = 38.6 + 0.3 * std::tanh(a) + 0.1 * a * b + 0.05 * standard_normal(rng);
  }
  return x;
}

void BM_GbdtFit(benchmark::State& state) {
  std::vector<double> y;
  const auto x = make_matrix(static_cast<std::size_t>(state.range(0)), 20, y);
  GbdtConfig cfg;
  cfg.n_trees = 50;
  for (auto _ : state) benchmark::DoNotOptimize(gbdt_fit(x, y, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GbdtFit)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_GbdtPredict(benchmark::State& state) {
  std::vector<double> y;
  const auto x = make_matrix(static_cast<std::size_t>(state.range(0)), 20, y);
  GbdtConfig cfg;
  cfg.n_trees = 200;
  const auto model = gbdt_fit(x, y, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GbdtPredict)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
