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
#include <herdtwin/synth.hpp>
#include <herdtwin/twin.hpp>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace herdtwin;

TEST(Twin, FeedbackGradientMatchesFiniteDifferences) {
  auto p = TwinParams::defaults();
  p[TwinParams::T_set] = 38.8;
  const double t_prev = 39.1, a = 0.4, thi = 79.0, y = 39.3;
  const auto g = feedback_gradient(t_prev, a, thi, p, y);
  auto loss = [&](const std::array<double, TwinParams::kCount>& v) {
    TwinParams q = p;
    q.value = v;
    const double pred = t_prev + ode_rhs(t_prev, a, thi, q);
    return (y - pred) * (y - pred);
  };
  for (std::size_t j = 0; j < TwinParams::kCount; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(p[j]));
    const double fd = oracle::central_difference(loss, p.value, j, h);
    EXPECT_LE(std::abs(g.dloss[j] - fd), 1e-5 * std::max(std::abs(fd), 1e-12) + 1e-14) << TwinParams::name(j);
  }
}

TEST(Twin, FeedbackUpdateDescendsAndClamps) {
  const auto p = TwinParams::defaults();
  const auto g = feedback_gradient(38.6, 0.2, 70.0, p, 38.9);
  const auto q = feedback_update(p, g, 1e-3);
  auto loss = [&](const TwinParams& v) {
    const double e = 38.9 - (38.6 + ode_rhs(38.6, 0.2, 70.0, v));
    return e * e;
  };
  EXPECT_LT(loss(q), loss(p));
  const auto big = feedback_update(p, g, 1e6);
  for (std::size_t j = 0; j < TwinParams::kCount; ++j) {
    EXPECT_GE(big[j], big.lo[j]);
    EXPECT_LE(big[j], big.hi[j]);
  }
}

TEST(Twin, NoiselessTrackingFollowsLatentState) {
  auto cfg = herdtwin::testing::small_herd(1, 1, 21);
  cfg.make_noiseless();
  const auto herd = simulate_herd(cfg);
  const auto frames = herd_frames(herd);
  const auto run = run_twin(frames[0], TwinConfig{});
  double se = 0.0;
  for (std::size_t t = 0; t < run.features.size(); ++t) {
    const double d = run.features[t].t_cbt_hat - herd.cows[0].latent_cbt[(frames[0].time_at(t) - herd.start)];
    se += d * d;
  }
  EXPECT_LT(std::sqrt(se / static_cast<double>(run.features.size())), 0.02);
}

TEST(Twin, OutputsDependOnlyOnThePast) {
  const auto herd = simulate_herd(herdtwin::testing::small_herd(1, 1, 8));
  const auto frame = herd_frames(herd)[0];
  const auto full = run_twin(frame, TwinConfig{});
  for (std::size_t t : {0u, 1u, 200u, 719u, 1300u}) {
    const auto cut = slice_window(frame, frame.time_at(t), t + 1);
    const auto part = run_twin(cut, TwinConfig{});
    for (std::size_t i = 0; i <= t; ++i) {
      ASSERT_EQ(part.features[i].t_future_hat, full.features[i].t_future_hat) << t << " " << i;
      ASSERT_EQ(part.features[i].sigma_uncertainty, full.features[i].sigma_uncertainty);
      ASSERT_EQ(part.features[i].p_behavior, full.features[i].p_behavior);
    }
  }
}

TEST(Twin, QualityBitsAndResiduals) {
  std::vector<double> cbt(30, 38.6), thi(30, 68.0);
  auto frame = herdtwin::testing::cbt_thi_frame(cbt, thi);
  const auto run = run_twin(frame, TwinConfig{});
  EXPECT_TRUE(run.features[5].quality & kCbtObserved);
  EXPECT_TRUE(run.features[5].quality & kThiObserved);
  EXPECT_FALSE(run.features[5].quality & kActivityObserved);
  EXPECT_TRUE(run.features[5].quality & kGpEmpty);
  EXPECT_FALSE(run.one_step_residual[0].has_value());
  EXPECT_TRUE(run.one_step_residual[1].has_value());
  for (const auto& f : run.features) {
    EXPECT_GE(f.p_stress, 0.0);
    EXPECT_LE(f.p_stress, 1.0);
    EXPECT_GT(f.sigma_uncertainty, 0.0);
  }
  const auto with_dt = attach_dt_features(frame, run);
  EXPECT_EQ(with_dt.channels(ModalityId::dt_features).size(), 8u);
}

TEST(Twin, RejectsCoarseFramesAndBadConfig) {
  std::map<ModalityId, std::vector<Channel>> chs;
  chs[ModalityId::cbt] = herdtwin::testing::empty_channels(ModalityId::cbt, 4);
  const auto coarse = AlignedFrame::build(CowId("c"), Timestamp{0}, 4, chs, 5);
  EXPECT_THROW((void)run_twin(coarse, TwinConfig{}), ResolutionError);
  TwinConfig bad;
  bad.horizon_minutes = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  TwinRun short_run;
  EXPECT_THROW((void)attach_dt_features(coarse, short_run), SchemaError);
}

TEST(Twin, StressSigmoidIsHalfAtThreshold) {
  EXPECT_DOUBLE_EQ(stress_sigmoid(38.8, 38.8, 5.0), 0.5);
  EXPECT_GT(stress_sigmoid(39.5, 38.8, 5.0), 0.95);
  EXPECT_NEAR(activity_from_immu(3.0, 4.0, 2.0), 2.5, 1e-12);
}
