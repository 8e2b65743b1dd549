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

#pragma once

#include <iosfwd>
#include <span>

#include "herdtwin/timeseries.hpp"

namespace herdtwin {

inline constexpr double kDefaultTheta = 38.8;
inline constexpr double kDefaultBeta = 5.0;

struct ForecastRecord {
  CowId cow{"unknown"};
  Timestamp t;
  double y_hat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double p_stress = 0.0;
  int label = 0;
  double beta = kDefaultBeta;
  double theta = kDefaultTheta;
};

/// Logistic 1 / (1 + exp(-beta (y_hat - theta))). Throws ConfigError when beta <= 0.
double stress_probability(double y_hat, double theta, double beta);
/// 1 iff y_hat > theta.
int stress_label(double y_hat, double theta);

/// Builds a record from a point forecast and its interval bounds.
ForecastRecord make_forecast(const CowId& cow, Timestamp t, double y_hat, double lo, double hi, double theta,
                             double beta);

/// Beta in {1, ..., 20} maximizing the F1 of probability > 0.5 against
/// labels (0/1), ties to the smaller beta. Single-class labels give the
/// default beta with a warning.
double calibrate_beta(std::span<const double> y_hat, std::span<const int> labels, double theta = kDefaultTheta);

/// Header `cow_id,t_utc,y_hat_c,lo_c,hi_c,p_stress,label`.
void write_forecast_header(std::ostream& out);
void write_forecast_line(std::ostream& out, const ForecastRecord& rec);

}  // namespace herdtwin
