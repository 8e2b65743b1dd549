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
#include <herdtwin/pipeline.hpp>
#include <herdtwin/synth.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "toy_data.hpp"

using namespace herdtwin;
using G = FeatureGroupId;

namespace {

PipelineConfig quick_pipeline() {
  PipelineConfig cfg;
  cfg.ensemble.k_folds = 3;
  cfg.ensemble.expert = herdtwin::testing::quick_gbdt();
  cfg.ensemble.tuner_trials = 1;
  cfg.uncertainty.bootstrap_b = 4;
  return cfg;
}

}  // namespace

TEST(Pipeline, BuildFeaturesWithAndWithoutTwin) {
  const auto herd = simulate_herd(herdtwin::testing::small_herd(2, 1, 31));
  const auto frames = herd_frames(herd);
  const PipelineConfig cfg;
  const auto with = build_features(frames, cfg.twin, cfg.features, true);
  const auto without = build_features(frames, cfg.twin, cfg.features, false);
  ASSERT_EQ(with.size(), 2u);
  ASSERT_FALSE(with[0].group(G::dt_features).columns.empty());
  EXPECT_EQ(without[0].names, with[0].names);
  std::size_t present_with = 0, present_without = 0;
  for (const auto& c : with[0].group(G::dt_features).columns) {
    present_with += with[0].column(c).count_present();
    present_without += without[0].column(c).count_present();
  }
  EXPECT_GT(present_with, 0u);
  EXPECT_EQ(present_without, 0u);
  EXPECT_EQ(with[1].cow->str(), "cow02");
}

TEST(Pipeline, DropGroupRemovesOnlyThatGroup) {
  const auto ds = herdtwin::testing::toy_dataset(3, 10);
  const auto out = drop_group(ds, G::dt_features);
  EXPECT_EQ(out.x.n_cols(), ds.x.n_cols() - 2);
  for (const auto& n : out.x.names) EXPECT_EQ(n.find("dt_features"), std::string::npos);
  EXPECT_EQ(out.group(G::dt_features), nullptr);
  EXPECT_NE(out.group(G::phys_cbt), nullptr);
  EXPECT_EQ(out.y, ds.y);
}

TEST(Pipeline, TrainPredictAndRoundTrip) {
  const auto ds = herdtwin::testing::toy_dataset(6, 60, 8);
  const auto cfg = quick_pipeline();
  const auto b = train_bundle(ds, cfg);
  EXPECT_EQ(b.training_cows, ds.cows);
  EXPECT_EQ(b.bootstrap.size(), 4u);
  EXPECT_GE(b.beta, 1.0);
  const auto p = predict_bundle(b, ds.x);
  ASSERT_EQ(p.y_hat.size(), ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    EXPECT_LE(p.lo[i], p.y_hat[i]);
    EXPECT_GE(p.hi[i], p.y_hat[i]);
    EXPECT_GE(p.hi[i] - p.y_hat[i], b.calibration.z * b.calibration.sigma_min - 1e-12);
    EXPECT_EQ(p.label[i], p.y_hat[i] > b.theta ? 1 : 0);
  }
  std::stringstream ss;
  write_bundle(ss, b);
  const auto back = read_bundle(ss);
  const auto q = predict_bundle(back, ds.x);
  EXPECT_EQ(q.y_hat, p.y_hat);
  EXPECT_EQ(q.lo, p.lo);
  EXPECT_EQ(back.calibration, b.calibration);

  const auto recs = forecast(b, ds);
  ASSERT_EQ(recs.size(), ds.rows());
  EXPECT_EQ(recs[0].cow, ds.cows[0]);
  EXPECT_EQ(recs[0].t, ds.time_of_row[0]);

  std::stringstream bad("TWINENS v0\n");
  EXPECT_THROW((void)read_bundle(bad), VersionError);
}

TEST(Pipeline, SingleGroupBundleUsesOneExpert) {
  const auto ds = herdtwin::testing::toy_dataset(6, 60, 9);
  const auto b = train_bundle(ds, quick_pipeline(), G::phys_cbt);
  ASSERT_TRUE(b.single_group.has_value());
  EXPECT_EQ(b.final_stage().manifest(), (std::vector<std::string>{"phys_cbt_a", "phys_cbt_b_mean"}));
  std::stringstream ss;
  write_bundle(ss, b);
  EXPECT_EQ(predict_bundle(read_bundle(ss), ds.x).y_hat, predict_bundle(b, ds.x).y_hat);
}

TEST(Pipeline, RejectsUnlabeledDataAndBadConfig) {
  auto ds = herdtwin::testing::toy_dataset(4, 20, 10);
  for (auto& y : ds.y) y = std::nan("");
  EXPECT_THROW((void)train_bundle(ds, quick_pipeline()), TrainingError);
  auto cfg = quick_pipeline();
  cfg.features.horizon_minutes = 60;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = quick_pipeline();
  cfg.uncertainty.bootstrap_b = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = quick_pipeline();
  cfg.heads.beta = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
