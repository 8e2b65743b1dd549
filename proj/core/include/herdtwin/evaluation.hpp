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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "herdtwin/pipeline.hpp"

namespace herdtwin {

struct MetricReport {
  std::size_t n = 0;
  double mae = 0.0;
  double rmse = 0.0;
  /// Absent when the truth has zero variance.
  std::optional<double> r2;
  double picp = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  /// Absent when only one stress class is present.
  std::optional<double> auc;
};

/// Regression metrics over (y_true, y_pred, lo, hi); classification metrics
/// over (labels_true, labels_pred, probs), which may have a different length.
MetricReport compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                             std::span<const double> lo, std::span<const double> hi,
                             std::span<const int> labels_true, std::span<const int> labels_pred,
                             std::span<const double> probs);

/// Metric names in report order and their values (nullopt for absent ones).
std::vector<std::pair<std::string, std::optional<double>>> metric_values(const MetricReport& m);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  /// Sample standard deviation over folds (n - 1); 0 for a single fold.
  double std = 0.0;
  /// Folds contributing a value.
  std::size_t folds = 0;
};
std::vector<MetricSummary> summarize(std::span<const MetricReport> folds);
const MetricSummary& summary_of(std::span<const MetricSummary> s, std::string_view name);

/// Throws LeakageError when the sets intersect.
void audit_disjoint(std::span<const CowId> training, std::span<const CowId> evaluation);

struct CvResult {
  FoldSpec spec;
  std::vector<MetricReport> folds;
  std::vector<MetricSummary> summary;
  /// Held-out predictions aligned with the dataset rows.
  std::vector<double> y_hat, lo, hi, p_stress;
  std::vector<int> row_fold;
  /// Threshold on y_hat maximizing TPR - FPR for the stress label.
  std::optional<double> roc_optimal_theta;
};

/// Cow-grouped cross-validation of the full pipeline. Each fold trains a
/// bundle on the other folds' cows only and evaluates on its own cows.
CvResult run_cv(const Dataset& ds, const PipelineConfig& cfg, int k,
                std::optional<FeatureGroupId> single_group = std::nullopt);

struct GroupAblationRow {
  std::string name;
  CvResult result;
};
/// One single-group run per feature group (canonical order) plus the
/// all-groups stacked run, all on the same folds.
std::vector<GroupAblationRow> ablate_feature_groups(const Dataset& ds, const PipelineConfig& cfg, int k);

struct DeltaRow {
  std::string metric;
  double with_dt = 0.0;
  double without_dt = 0.0;
  /// Relative change against the without-twin value, signed so that positive
  /// means the twin helps.
  double relative_pct = 0.0;
  /// with - without.
  double absolute_delta = 0.0;
};
DeltaRow compare_metric(std::string metric, double with_dt, double without_dt, bool lower_is_better);

struct DtAblation {
  CvResult with_dt;
  CvResult without_dt;
  std::vector<DeltaRow> deltas;
};
/// Two stacked runs on the same folds, differing only in the dt_features group.
DtAblation ablate_digital_twin(const Dataset& ds, const PipelineConfig& cfg, int k);
DtAblation ablate_digital_twin(const Dataset& ds, const PipelineConfig& cfg, int k, CvResult with_dt);
std::vector<DeltaRow> dt_deltas(const CvResult& with_dt, const CvResult& without_dt);

/// Delimited per-fold table followed by mean and std rows.
void write_cv_report(std::ostream& out, const CvResult& r);
/// Plain-text mean +- std block.
void write_cv_summary(std::ostream& out, const CvResult& r);
void write_group_ablation(std::ostream& out, std::span<const GroupAblationRow> rows);
void write_dt_ablation(std::ostream& out, const DtAblation& a);
/// Held-out residual series: cow_id,t_utc,y,y_hat,lo,hi,p_stress,fold.
void write_residuals(std::ostream& out, const Dataset& ds, const CvResult& r);
/// ROC points of the pooled held-out stress probabilities.
void write_roc(std::ostream& out, const Dataset& ds, const CvResult& r);

}  // namespace herdtwin
