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

#include "herdtwin/heads.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/errors.hpp"
#include "herdtwin/metrics.hpp"

namespace herdtwin {

double stress_probability(double y_hat, double theta, double beta) {
  if (!(beta > 0.0)) throw ConfigError(fmt::format("stress beta must be > 0, got {}", beta));
  return 1.0 / (1.0 + std::exp(-beta * (y_hat - theta)));
}

int stress_label(double y_hat, double theta) { return y_hat > theta ? 1 : 0; }

ForecastRecord make_forecast(const CowId& cow, Timestamp t, double y_hat, double lo, double hi, double theta,
                             double beta) {
  ForecastRecord rec;
  rec.cow = cow;
  rec.t = t;
  rec.y_hat = y_hat;
  rec.lo = std::min(lo, y_hat);
  rec.hi = std::max(hi, y_hat);
  rec.theta = theta;
  rec.beta = beta;
  rec.p_stress = stress_probability(y_hat, theta, beta);
  rec.label = stress_label(y_hat, theta);
  return rec;
}

double calibrate_beta(std::span<const double> y_hat, std::span<const int> labels, double theta) {
  if (y_hat.size() != labels.size()) throw SchemaError("beta calibration inputs are not aligned");
  const bool pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
  const bool neg = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 0; });
  if (!pos || !neg) {
    spdlog::warn("stress validation labels have a single class; using beta {}", kDefaultBeta);
    return kDefaultBeta;
  }
  double best_beta = 1.0, best_f1 = -1.0;
  std::vector<int> pred(y_hat.size());
  for (int b = 1; b <= 20; ++b) {
    for (std::size_t i = 0; i < y_hat.size(); ++i) pred[i] = stress_probability(y_hat[i], theta, b) > 0.5 ? 1 : 0;
    const double f1 = f1_score(confusion(labels, pred));
    if (f1 > best_f1) {
      best_f1 = f1;
      best_beta = b;
    }
  }
  return best_beta;
}

void write_forecast_header(std::ostream& out) { out << "cow_id,t_utc,y_hat_c,lo_c,hi_c,p_stress,label\n"; }

void write_forecast_line(std::ostream& out, const ForecastRecord& rec) {
  out << fmt::format("{},{}Z,{:.4f},{:.4f},{:.4f},{:.4f},{}\n", rec.cow.str(), rec.t.iso(), rec.y_hat, rec.lo, rec.hi,
                     rec.p_stress, rec.label);
}

}  // namespace herdtwin
