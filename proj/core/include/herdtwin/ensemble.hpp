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
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "herdtwin/features.hpp"
#include "herdtwin/gbdt.hpp"

namespace herdtwin {

class BinaryWriter;
class BinaryReader;

/// Feature rows of several cows stacked for learning.
struct Dataset {
  std::vector<CowId> cows;
  /// Index into cows for each row.
  std::vector<std::size_t> cow_of_row;
  std::vector<Timestamp> time_of_row;
  DataMatrix x;
  std::vector<FeatureGroup> groups;
  /// CBT at t + horizon; NaN when unlabeled.
  std::vector<double> y;
  /// Window-max stress label as 0/1; -1 when unlabeled.
  std::vector<int> y_stress;

  std::size_t rows() const { return x.rows; }
  const FeatureGroup* group(FeatureGroupId id) const;
  /// Rows of the given cows, in row order.
  std::vector<std::size_t> rows_of(std::span<const CowId> cows) const;
  /// Subset of rows; the cow list shrinks to the cows owning them.
  Dataset select_rows(std::span<const std::size_t> rows) const;
};

/// Stacks every row_stride-th minute of each cow (minutes whose offset from
/// the cow's start is a multiple of the stride). Throws SchemaError when the
/// column sets differ between cows.
Dataset make_dataset(std::span<const FeatureMatrix> fms, std::size_t row_stride = 1, bool labeled_only = false);

/// Cow-grouped fold assignment.
struct FoldSpec {
  int k = 0;
  std::uint64_t seed = 0;
  /// Sorted cow ids and the fold of each.
  std::vector<CowId> cows;
  std::vector<int> fold_of_cow;

  int fold_of(const CowId& cow) const;
  std::vector<CowId> held_out(int fold) const;
  std::vector<CowId> training(int fold) const;
  /// Fold of every dataset row; -1 for cows outside the spec.
  std::vector<int> row_folds(const Dataset& ds) const;

  bool operator==(const FoldSpec&) const = default;
};

/// Sorts the cows, shuffles them with the seed and deals them round-robin, so
/// fold sizes differ by at most one. Throws ConfigError when fewer than k cows.
FoldSpec group_kfold(std::vector<CowId> cows, int k, std::uint64_t seed);

/// max(0, R²) normalized to sum 1; uniform when no group has positive R².
struct ExpertWeights {
  std::map<FeatureGroupId, double> weights;
  bool uniform_fallback = false;
};
ExpertWeights expert_weights(const std::map<FeatureGroupId, double>& val_r2);

struct ExpertSet {
  /// Groups in canonical order, including excluded ones (weight 0, no model).
  std::vector<FeatureGroupId> groups;
  std::map<FeatureGroupId, GbdtModel> experts;
  std::map<FeatureGroupId, std::vector<double>> oof_pred;
  std::map<FeatureGroupId, double> val_r2;
  std::map<FeatureGroupId, double> weights;
  bool uniform_fallback = false;
};

/// Per group: out-of-fold predictions over the folds of spec, validation R²,
/// a final expert refit on all rows, and the clipped-R² weights. Groups
/// without any present value are excluded with a warning.
ExpertSet train_experts(const Dataset& ds, const FoldSpec& spec, std::span<const FeatureGroupId> groups,
                        const GbdtConfig& cfg);

/// Columns of a group restricted to ds (by name).
DataMatrix group_columns(const DataMatrix& x, const FeatureGroup& g);

enum class GlobalFeatures : std::uint8_t { time, time_env_milk };
std::string_view to_string(GlobalFeatures g);
GlobalFeatures global_features_from_string(std::string_view s);

/// Names of the global meta columns drawn from ds's manifest.
std::vector<std::string> global_columns(std::span<const FeatureGroup> groups, GlobalFeatures mode);
/// Meta column name of a group's weighted prediction.
std::string meta_column(FeatureGroupId g);

/// [w_g * yhat_g per group] ++ global columns. With use_oof the expert values
/// come from es.oof_pred (training rows of ds), otherwise from the final experts.
DataMatrix build_meta_matrix(const ExpertSet& es, const DataMatrix& x, std::span<const std::string> global_cols,
                             bool use_oof);

struct TunerConfig {
  int n_trials = 20;
  std::uint64_t seed = 0;
  void validate() const;
};

struct TrialRecord {
  int trial = 0;
  GbdtConfig config;
  double mean_r2 = 0.0;
  std::vector<double> fold_r2;
};

struct TunedMeta {
  GbdtModel model;
  std::vector<TrialRecord> log;
  int best_trial = 0;
  /// Cross-fold predictions of the best trial (NaN for rows without a fold).
  std::vector<double> oof_pred;
};

/// Seeded random search over the boosting hyperparameters scored by mean
/// cross-fold R²; the best config is refit on all rows.
TunedMeta tune_and_train_meta(const DataMatrix& meta, std::span<const double> y, std::span<const int> row_fold,
                              int k, const TunerConfig& cfg);
GbdtConfig sample_trial_config(std::uint64_t seed, int trial);

/// Cross-fold predictions of one config: each fold's rows predicted by a model
/// fit on the other folds.
std::vector<double> cross_fold_predict(const DataMatrix& x, std::span<const double> y, std::span<const int> row_fold,
                                       int k, const GbdtConfig& cfg);

struct EnsembleConfig {
  int k_folds = 5;
  std::uint64_t seed = 42;
  GbdtConfig expert;
  std::vector<FeatureGroupId> groups{kAllGroups.begin(), kAllGroups.end()};
  GlobalFeatures global = GlobalFeatures::time_env_milk;
  int tuner_trials = 20;
  void validate() const;
};

struct EnsembleModel {
  ExpertSet experts;
  GbdtModel meta;
  std::vector<std::string> meta_manifest;
  std::vector<std::string> global_columns;
  std::vector<TrialRecord> tuner_log;
  int best_trial = 0;
  FoldSpec fold_spec;
  /// Cross-fold meta predictions on the training rows (for calibration).
  std::vector<double> meta_oof;
  /// Training meta matrix (OOF expert columns) and its labels.
  DataMatrix meta_train;
};

EnsembleModel train_ensemble(const Dataset& ds, const EnsembleConfig& cfg);
/// Meta rows for inference from raw feature columns. Throws SchemaError naming
/// the first group whose columns are missing from x.
DataMatrix ensemble_meta_rows(const EnsembleModel& em, const DataMatrix& x);
std::vector<double> predict_ensemble(const EnsembleModel& em, const DataMatrix& x);

/// Tuner log as delimited text.
void write_tuner_log(std::ostream& out, std::span<const TrialRecord> log);

void write_ensemble_body(BinaryWriter& w, const EnsembleModel& em);
EnsembleModel read_ensemble_body(BinaryReader& r);

}  // namespace herdtwin
