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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "herdtwin/gbdt.hpp"
#include "herdtwin/timeseries.hpp"

namespace herdtwin {

class BinaryWriter;
class BinaryReader;

struct BootstrapReplica {
  std::uint64_t seed = 0;
  /// Cow indices drawn with replacement.
  std::vector<std::uint32_t> draws;
  GbdtModel model;
};

struct BootstrapSet {
  std::vector<CowId> cows;
  std::vector<BootstrapReplica> replicas;

  std::size_t size() const { return replicas.size(); }
  /// True when replica b never drew cow c.
  bool out_of_bag(std::size_t b, std::size_t cow) const;
};

/// Fits B replicas of cfg, each on the rows of cows.size() cows drawn with
/// replacement (all rows of a drawn cow, repeated per draw). Throws
/// ConfigError when B < 2.
BootstrapSet bootstrap_fit(const DataMatrix& x, std::span<const double> y, std::span<const std::size_t> cow_of_row,
                           std::span<const CowId> cows, const GbdtConfig& cfg, int B, std::uint64_t seed);

/// Replica predictions, one vector per replica.
std::vector<std::vector<double>> replica_predictions(const BootstrapSet& bs, const DataMatrix& x);
/// Sample standard deviation (n - 1) of the values.
double sample_std(std::span<const double> v);
/// Per-row sample std of all replica predictions.
std::vector<double> sigma_raw(const BootstrapSet& bs, const DataMatrix& x);
/// Per-row std over the replicas that did not draw the row's cow; falls back to
/// all replicas when fewer than two are out of bag.
std::vector<double> sigma_raw_oob(const BootstrapSet& bs, const DataMatrix& x, std::span<const std::size_t> cow_of_row);

struct CalibrationConstants {
  double alpha = 1.0;
  double sigma_min = 0.03;
  double z = 1.96;
  /// Set when no grid alpha reached the target coverage.
  bool under_coverage = false;

  void validate() const;
  bool operator==(const CalibrationConstants&) const = default;
};

/// Grid alpha in {0.5, 0.6, ..., 3.0}.
std::vector<double> alpha_grid();

/// Smallest grid alpha whose coverage of y_hat +- z * max(alpha * sigma, sigma_min)
/// reaches target. Throws ConfigError with fewer than 50 rows.
CalibrationConstants calibrate(std::span<const double> y_hat, std::span<const double> sigma,
                               std::span<const double> y, double target_coverage = 0.95, double sigma_min = 0.03,
                               double z = 1.96);

double sigma_final(double sigma_raw, const CalibrationConstants& cc);
std::pair<double, double> interval(double y_hat, double sigma_raw, const CalibrationConstants& cc);

void write_bootstrap_body(BinaryWriter& w, const BootstrapSet& bs);
BootstrapSet read_bootstrap_body(BinaryReader& r);

}  // namespace herdtwin
