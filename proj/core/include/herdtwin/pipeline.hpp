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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "herdtwin/ensemble.hpp"
#include "herdtwin/features.hpp"
#include "herdtwin/heads.hpp"
#include "herdtwin/twin.hpp"
#include "herdtwin/uncertainty.hpp"

namespace herdtwin {

struct UncertaintyConfig {
  int bootstrap_b = 100;
  double target_coverage = 0.95;
  double sigma_min = 0.03;
  double z = 1.96;
  void validate() const;
};

struct HeadsConfig {
  double theta = kDefaultTheta;
  /// Calibrate beta on validation predictions; otherwise use beta.
  bool calibrate = true;
  double beta = kDefaultBeta;
  void validate() const;
};

struct PipelineConfig {
  TwinConfig twin;
  FeatureConfig features;
  EnsembleConfig ensemble;
  UncertaintyConfig uncertainty;
  HeadsConfig heads;
  /// Attach digital-twin features before assembling.
  bool use_twin = true;
  /// Keep every row_stride-th minute for training and evaluation.
  std::size_t row_stride = 5;
  void validate() const;
};

/// Runs the twin (when enabled) and assembles features for each cow frame.
std::vector<FeatureMatrix> build_features(std::span<const AlignedFrame> frames, const TwinConfig& twin,
                                          const FeatureConfig& features, bool use_twin);

/// Removes a feature group's columns from the dataset.
Dataset drop_group(const Dataset& ds, FeatureGroupId g);

/// Trained artifact: stacked ensemble (or a single group expert), bootstrap
/// replicas of its final stage, interval calibration and stress head.
struct Bundle {
  /// Set for single-group models; the ensemble then holds only that expert.
  std::optional<FeatureGroupId> single_group;
  EnsembleModel ensemble;
  BootstrapSet bootstrap;
  CalibrationConstants calibration;
  double beta = kDefaultBeta;
  double theta = kDefaultTheta;
  /// Cows whose rows trained any stage.
  std::vector<CowId> training_cows;

  /// Input matrix of the final stage for raw feature rows.
  DataMatrix final_stage_rows(const DataMatrix& x) const;
  const GbdtModel& final_stage() const;
};

/// Trains every stage on ds. With single_group only that group's expert is
/// fit, without stacking or tuning.
Bundle train_bundle(const Dataset& ds, const PipelineConfig& cfg,
                    std::optional<FeatureGroupId> single_group = std::nullopt);

struct BundlePrediction {
  std::vector<double> y_hat, sigma_raw, lo, hi, p_stress;
  std::vector<int> label;
};
BundlePrediction predict_bundle(const Bundle& b, const DataMatrix& x);

/// Forecast records for every row of ds.
std::vector<ForecastRecord> forecast(const Bundle& b, const Dataset& ds);

inline constexpr std::string_view kBundleMagic = "TWINENS v1";
void write_bundle(std::ostream& out, const Bundle& b);
Bundle read_bundle(std::istream& in);
void write_bundle_file(const std::filesystem::path& path, const Bundle& b);
Bundle read_bundle_file(const std::filesystem::path& path);

}  // namespace herdtwin
