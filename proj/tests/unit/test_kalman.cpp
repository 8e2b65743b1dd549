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
#include <herdtwin/kalman.hpp>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

using namespace herdtwin;

namespace {

TwinState start_state() {
  TwinState s;
  s.x << 38.6, 0.0, 0.3;
  s.P = Eigen::Vector3d(0.04, 1e-4, 0.1).asDiagonal();
  return s;
}

}  // namespace

TEST(Kalman, ScalarUpdateMatchesClosedForm) {
  const auto noise = NoiseModel::defaults();
  const auto prior = start_state();
  Observation obs;
  obs.cbt = 38.9;
  const auto post = kalman_update(prior, obs, noise);
  const double p = prior.P(0, 0), r = noise.r_cbt;
  EXPECT_NEAR(post.x(0), 38.6 + p / (p + r) * 0.3, 1e-12);
  EXPECT_NEAR(post.P(0, 0), p * r / (p + r), 1e-12);
  EXPECT_DOUBLE_EQ(post.x(2), prior.x(2));
}

TEST(Kalman, NoObservationLeavesPriorUntouched) {
  const auto prior = start_state();
  const auto post = kalman_update(prior, {}, NoiseModel::defaults());
  EXPECT_EQ(post.x, prior.x);
  EXPECT_EQ(post.P, prior.P);
}

TEST(Kalman, PredictPropagatesCovarianceThroughJacobian) {
  const auto p = TwinParams::defaults();
  const auto bm = BehaviorModel::defaults();
  const auto noise = NoiseModel::defaults();
  const auto s = start_state();
  const auto out = kalman_predict(s, {75.0, 14}, p, bm, noise);
  EXPECT_NEAR(out.x(0), euler_step(38.6, 0.3, 75.0, p), 1e-12);
  const Eigen::Matrix3d f = transition_jacobian(p);
  const Eigen::Matrix3d expect = f * s.P * f.transpose() + noise.Q;
  EXPECT_LT((out.P - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(out.t, s.t + 1);
}

TEST(Kalman, CovarianceStaysSymmetricPositive) {
  const auto p = TwinParams::defaults();
  const auto bm = BehaviorModel::defaults();
  const auto noise = NoiseModel::defaults();
  auto s = start_state();
  for (int i = 0; i < 2000; ++i) {
    s = kalman_predict(s, {70.0 + (i % 50) * 0.2, (i / 60) % 24}, p, bm, noise);
    Observation obs;
    if (i % 3 != 0) obs.cbt = 38.7;
    if (i % 2 == 0) obs.activity = 0.4;
    s = kalman_update(s, obs, noise);
    ASSERT_LT((s.P - s.P.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.P);
    ASSERT_GE(es.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Kalman, SingularInnovationThrows) {
  auto noise = NoiseModel::defaults();
  noise.r_cbt = 0.0;
  auto s = start_state();
  s.P.setZero();
  Observation obs;
  obs.cbt = 38.0;
  EXPECT_THROW((void)kalman_update(s, obs, noise), NumericalError);
}

TEST(Kalman, BehaviorCorrectionFavoursMatchingState) {
  const auto bm = BehaviorModel::defaults();
  const BehaviorDist flat{0.25, 0.25, 0.25, 0.25};
  const auto walking = behavior_correct(flat, 1.0, bm);
  EXPECT_GT(walking[static_cast<std::size_t>(Behavior::walking)], 0.9);
  const auto lying = behavior_correct(flat, 0.0, bm);
  EXPECT_GT(lying[static_cast<std::size_t>(Behavior::lying)], 0.5);
  double sum = 0.0;
  for (double v : lying) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Kalman, NoiseValidation) {
  auto n = NoiseModel::defaults();
  n.validate();
  n.Q(0, 1) = 1.0;
  EXPECT_THROW(n.validate(), ConfigError);
  n = NoiseModel::defaults();
  n.r_activity = -1.0;
  EXPECT_THROW(n.validate(), ConfigError);
}
