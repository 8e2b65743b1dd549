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

#include "herdtwin/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/binary_io.hpp"
#include "herdtwin/errors.hpp"
#include "herdtwin/metrics.hpp"
#include "herdtwin/parallel.hpp"
#include "herdtwin/rng.hpp"

namespace herdtwin {

bool BootstrapSet::out_of_bag(std::size_t b, std::size_t cow) const {
  const auto& d = replicas[b].draws;
  return std::find(d.begin(), d.end(), static_cast<std::uint32_t>(cow)) == d.end();
}

BootstrapSet bootstrap_fit(const DataMatrix& x, std::span<const double> y, std::span<const std::size_t> cow_of_row,
                           std::span<const CowId> cows, const GbdtConfig& cfg, int B, std::uint64_t seed) {
  if (B < 2) throw ConfigError("bootstrap needs B >= 2");
  if (cows.empty()) throw ConfigError("bootstrap needs at least one cow");
  if (cow_of_row.size() != x.rows || y.size() != x.rows) throw SchemaError("bootstrap inputs are not aligned");
  std::vector<std::vector<std::size_t>> rows_of(cows.size());
  for (std::size_t r = 0; r < x.rows; ++r) rows_of[cow_of_row[r]].push_back(r);

  BootstrapSet bs;
  bs.cows.assign(cows.begin(), cows.end());
  bs.replicas.resize(static_cast<std::size_t>(B));
  parallel_for(bs.replicas.size(), [&](std::size_t b) {
    BootstrapReplica& rep = bs.replicas[b];
    rep.seed = derive_seed(seed, {static_cast<std::uint64_t>(b)});
    Rng rng(rep.seed);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cows.size(); ++i) {
      const auto c = static_cast<std::uint32_t>(uniform01(rng) * static_cast<double>(cows.size()));
      rep.draws.push_back(c);
      idx.insert(idx.end(), rows_of[c].begin(), rows_of[c].end());
    }
    std::vector<double> yb;
    yb.reserve(idx.size());
    for (std::size_t r : idx) yb.push_back(y[r]);
    GbdtConfig c = cfg;
    c.seed = derive_seed(rep.seed, {1});
    rep.model = gbdt_fit(x.select_rows(idx), yb, c);
  });
  return bs;
}

std::vector<std::vector<double>> replica_predictions(const BootstrapSet& bs, const DataMatrix& x) {
  std::vector<std::vector<double>> out(bs.size());
  parallel_for(bs.size(), [&](std::size_t b) { out[b] = bs.replicas[b].model.predict(x); });
  return out;
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<double> sigma_raw(const BootstrapSet& bs, const DataMatrix& x) {
  const auto preds = replica_predictions(bs, x);
  std::vector<double> out(x.rows);
  std::vector<double> v(bs.size());
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t b = 0; b < bs.size(); ++b) v[b] = preds[b][r];
    out[r] = sample_std(v);
  }
  return out;
}

std::vector<double> sigma_raw_oob(const BootstrapSet& bs, const DataMatrix& x,
                                  std::span<const std::size_t> cow_of_row) {
  const auto preds = replica_predictions(bs, x);
  std::vector<std::vector<std::size_t>> oob(bs.cows.size());
  for (std::size_t c = 0; c < bs.cows.size(); ++c)
    for (std::size_t b = 0; b < bs.size(); ++b)
      if (bs.out_of_bag(b, c)) oob[c].push_back(b);
  std::vector<double> out(x.rows);
  std::vector<double> v;
  for (std::size_t r = 0; r < x.rows; ++r) {
    v.clear();
    const auto& use = oob[cow_of_row[r]];
    if (use.size() >= 2) {
      for (std::size_t b : use) v.push_back(preds[b][r]);
    } else {
      for (std::size_t b = 0; b < bs.size(); ++b) v.push_back(preds[b][r]);
    }
    out[r] = sample_std(v);
  }
  return out;
}

void CalibrationConstants::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (!(sigma_min >= 0.0)) throw ConfigError("sigma_min must be >= 0");
  if (!(z > 0.0)) throw ConfigError("z must be > 0");
}

std::vector<double> alpha_grid() {
  std::vector<double> g;
  for (int i = 5; i <= 30; ++i) g.push_back(i / 10.0);
  return g;
}

double sigma_final(double sigma_raw, const CalibrationConstants& cc) {
  return std::max(cc.alpha * sigma_raw, cc.sigma_min);
}

std::pair<double, double> interval(double y_hat, double sigma_raw, const CalibrationConstants& cc) {
  const double h = cc.z * sigma_final(sigma_raw, cc);
  return {y_hat - h, y_hat + h};
}

CalibrationConstants calibrate(std::span<const double> y_hat, std::span<const double> sigma,
                               std::span<const double> y, double target_coverage, double sigma_min, double z) {
  if (y_hat.size() != y.size() || sigma.size() != y.size()) throw SchemaError("calibration inputs are not aligned");
  if (y.size() < 50) throw ConfigError(fmt::format("calibration needs >= 50 rows, got {}", y.size()));
  if (!(target_coverage > 0.0 && target_coverage < 1.0)) throw ConfigError("target coverage must be in (0, 1)");
  CalibrationConstants cc{1.0, sigma_min, z, false};
  cc.validate();
  std::vector<double> lo(y.size()), hi(y.size());
  for (double a : alpha_grid()) {
    cc.alpha = a;
    for (std::size_t i = 0; i < y.size(); ++i) std::tie(lo[i], hi[i]) = interval(y_hat[i], sigma[i], cc);
    if (picp(y, lo, hi) >= target_coverage) return cc;
  }
  spdlog::warn("no alpha in [0.5, 3.0] reaches {:.3f} coverage; using alpha 3.0", target_coverage);
  cc.alpha = 3.0;
  cc.under_coverage = true;
  return cc;
}

void write_bootstrap_body(BinaryWriter& w, const BootstrapSet& bs) {
  w.u64(bs.cows.size());
  for (const auto& c : bs.cows) w.str(c.str());
  w.u64(bs.replicas.size());
  for (const auto& rep : bs.replicas) {
    w.u64(rep.seed);
    w.u64(rep.draws.size());
    for (auto d : rep.draws) w.u32(d);
    write_gbdt_body(w, rep.model);
  }
}

BootstrapSet read_bootstrap_body(BinaryReader& r) {
  BootstrapSet bs;
  const std::uint64_t n_cows = r.u64();
  if (n_cows > (1u << 20)) throw FormatError("corrupt bootstrap cow list");
  for (std::uint64_t i = 0; i < n_cows; ++i) bs.cows.emplace_back(r.str());
  const std::uint64_t n = r.u64();
  if (n > (1u << 16)) throw FormatError("corrupt replica count");
  for (std::uint64_t b = 0; b < n; ++b) {
    BootstrapReplica rep;
    rep.seed = r.u64();
    const std::uint64_t nd = r.u64();
    if (nd > n_cows) throw FormatError("corrupt replica draws");
    for (std::uint64_t i = 0; i < nd; ++i) {
      rep.draws.push_back(r.u32());
      if (rep.draws.back() >= n_cows) throw FormatError("replica draw out of range");
    }
    rep.model = read_gbdt_body(r);
    bs.replicas.push_back(std::move(rep));
  }
  return bs;
}

}  // namespace herdtwin
