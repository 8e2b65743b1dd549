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

#include <herdtwin/errors.hpp>
#include <herdtwin/evaluation.hpp>
#include <herdtwin/parallel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "toy_data.hpp"

using namespace herdtwin;

namespace {

PipelineConfig quick_pipeline() {
  PipelineConfig cfg;
  cfg.ensemble.k_folds = 3;
  cfg.ensemble.expert = herdtwin::testing::quick_gbdt();
  cfg.ensemble.tuner_trials = 1;
  cfg.uncertainty.bootstrap_b = 3;
  return cfg;
}

}  // namespace

TEST(Evaluation, ReferenceDeltaArithmetic) {
  const auto mae = compare_metric("mae", 0.1147, 0.1385, true);
  EXPECT_NEAR(mae.relative_pct, 17.18, 0.01);
  EXPECT_NEAR(mae.absolute_delta, -0.0238, 1e-12);
  const auto r2 = compare_metric("r2", 0.9, 0.8, false);
  EXPECT_NEAR(r2.relative_pct, 12.5, 1e-12);
  EXPECT_EQ(compare_metric("x", 1.0, 0.0, false).relative_pct, 0.0);
}

TEST(Evaluation, MetricsAndSummary) {
  const std::vector<double> y{1, 2, 3}, p{1, 2, 5}, lo{0, 0, 0}, hi{2, 2, 2};
  const std::vector<int> lt{0, 1, 1}, lp{0, 1, 0};
  const std::vector<double> pr{0.1, 0.9, 0.4};
  const auto m = compute_metrics(y, p, lo, hi, lt, lp, pr);
  EXPECT_EQ(m.n, 3u);
  EXPECT_NEAR(m.mae, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.picp, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.recall, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(*m.auc, 1.0);
  const auto names = metric_values(m);
  ASSERT_EQ(names.size(), 9u);
  EXPECT_EQ(names.front().first, "mae");
  EXPECT_EQ(names.back().first, "auc");

  MetricReport a = m, b = m;
  a.mae = 1.0;
  b.mae = 3.0;
  const auto s = summarize(std::vector<MetricReport>{a, b});
  EXPECT_DOUBLE_EQ(summary_of(s, "mae").mean, 2.0);
  EXPECT_DOUBLE_EQ(summary_of(s, "mae").std, std::sqrt(2.0));
  EXPECT_EQ(summary_of(s, "mae").folds, 2u);
}

TEST(Evaluation, AuditRejectsSharedCows) {
  const std::vector<CowId> train{CowId("a"), CowId("b")};
  EXPECT_NO_THROW(audit_disjoint(train, std::vector<CowId>{CowId("c")}));
  EXPECT_THROW(audit_disjoint(train, std::vector<CowId>{CowId("c"), CowId("b")}), LeakageError);
}

TEST(Evaluation, CrossValidationHoldsOutWholeCows) {
  const auto ds = herdtwin::testing::toy_dataset(6, 50, 12);
  const auto cfg = quick_pipeline();
  const auto r = run_cv(ds, cfg, 3);
  ASSERT_EQ(r.folds.size(), 3u);
  std::size_t n = 0;
  for (const auto& f : r.folds) n += f.n;
  EXPECT_EQ(n, ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    ASSERT_EQ(r.row_fold[i], r.spec.fold_of(ds.cows[ds.cow_of_row[i]]));
    ASSERT_TRUE(std::isfinite(r.y_hat[i]));
  }
  EXPECT_GT(summary_of(r.summary, "r2").mean, 0.5);

  const unsigned saved = max_jobs();
  set_max_jobs(1);
  const auto again = run_cv(ds, cfg, 3);
  set_max_jobs(saved);
  EXPECT_EQ(again.y_hat, r.y_hat);

  std::ostringstream rep, res;
  write_cv_report(rep, r);
  EXPECT_EQ(rep.str().substr(0, rep.str().find('\n')), "fold,n,mae,rmse,r2,picp,f1,precision,recall,accuracy,auc");
  write_residuals(res, ds, r);
  const std::string res_text = res.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(res_text.begin(), res_text.end(), '\n')), ds.rows() + 1);
  EXPECT_THROW((void)run_cv(ds, cfg, 7), ConfigError);
}

TEST(Evaluation, AblationTablesHaveFixedShape) {
  const auto ds = herdtwin::testing::toy_dataset(6, 40, 13);
  const auto cfg = quick_pipeline();
  const auto rows = ablate_feature_groups(ds, cfg, 3);
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    EXPECT_EQ(rows[g].name, to_string(kAllGroups[g]));
    EXPECT_EQ(rows[g].result.spec, rows.back().result.spec);
  }
  EXPECT_EQ(rows.back().name, "all_groups");
  std::ostringstream out;
  write_group_ablation(out, rows);
  const std::string table = out.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n')), 10u);

  const auto dt = ablate_digital_twin(ds, cfg, 3, rows.back().result);
  EXPECT_EQ(dt.with_dt.y_hat, rows.back().result.y_hat);
  ASSERT_EQ(dt.deltas.size(), 6u);
  EXPECT_EQ(dt.deltas[0].metric, "mae");
  EXPECT_EQ(dt.without_dt.spec, dt.with_dt.spec);
  EXPECT_GT(summary_of(dt.with_dt.summary, "r2").mean, summary_of(dt.without_dt.summary, "r2").mean);
}
