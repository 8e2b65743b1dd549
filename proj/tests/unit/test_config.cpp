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

#include <gtest/gtest.h>

#include <sstream>

#include "run_config.hpp"

using namespace herdtwin;
using namespace herdtwin::app;

TEST(RunConfigTest, LoadsSectionsAndReportsSeed) {
  RunConfig cfg;
  std::istringstream in(
      "; comment\n[run]\nseed = 7\njobs = 2\n[synth]\nn_cows = 3\n[gbdt]\nlearning_rate = 0.1\n"
      "[ensemble]\ngroups = phys_cbt, dt_features\nglobal_features = time\n[ingest]\nagg_ankle = max\n");
  EXPECT_TRUE(load_config_stream(cfg, in));
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.jobs, 2u);
  EXPECT_EQ(cfg.synth.n_cows, 3);
  EXPECT_EQ(cfg.pipeline.ensemble.expert.learning_rate, 0.1);
  EXPECT_EQ(cfg.pipeline.ensemble.groups,
            (std::vector<FeatureGroupId>{FeatureGroupId::phys_cbt, FeatureGroupId::dt_features}));
  EXPECT_EQ(cfg.pipeline.ensemble.global, GlobalFeatures::time);
  EXPECT_EQ(cfg.ingest.aggregation_for(ModalityId::ankle), Aggregation::max);
  cfg.apply_seed();
  EXPECT_EQ(cfg.synth.seed, 7u);
  EXPECT_EQ(cfg.pipeline.ensemble.seed, 7u);

  RunConfig other;
  std::istringstream no_seed("[synth]\ndays = 2\n");
  EXPECT_FALSE(load_config_stream(other, no_seed));
}

TEST(RunConfigTest, RejectsUnknownKeysAndBadValues) {
  RunConfig cfg;
  std::istringstream unknown("[synth]\ncows = 3\n");
  EXPECT_THROW((void)load_config_stream(cfg, unknown), ConfigError);
  std::istringstream loose("seed = 3\n");
  EXPECT_THROW((void)load_config_stream(cfg, loose), ConfigError);
  std::istringstream section("[nope]\nx = 1\n");
  EXPECT_THROW((void)load_config_stream(cfg, section), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "synth.n_cows", "three"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "run.use_twin", "maybe"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "ensemble.groups", "phys_cbt,sonar"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "nokey", "1"), ConfigError);
}

TEST(RunConfigTest, EffectiveConfigRoundTrips) {
  RunConfig cfg;
  set_config_value(cfg, "run.seed", "99");
  set_config_value(cfg, "twin.feedback_rate", "0.0025");
  set_config_value(cfg, "features.windows", "10,30");
  set_config_value(cfg, "uncertainty.sigma_min", "0.05");
  set_config_value(cfg, "synth.start", "2024-07-01T00:00");
  std::stringstream ss;
  write_effective_config(ss, cfg);
  RunConfig back;
  EXPECT_TRUE(load_config_stream(back, ss));
  for (const auto& key : config_keys()) EXPECT_EQ(get_config_value(back, key), get_config_value(cfg, key)) << key;
  EXPECT_EQ(back.pipeline.features.windows, (std::vector<int>{10, 30}));
}

TEST(RunConfigTest, ValidationCatchesInconsistentHorizons) {
  RunConfig cfg;
  set_config_value(cfg, "twin.horizon_minutes", "60");
  EXPECT_THROW(cfg.validate(), ConfigError);
  set_config_value(cfg, "features.horizon_minutes", "60");
  EXPECT_NO_THROW(cfg.validate());
}
