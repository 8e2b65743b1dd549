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
#include <herdtwin/twin_model.hpp>

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "oracles.hpp"

using namespace herdtwin;
using P = TwinParams;

TEST(TwinModel, DefaultsHaveRestingFixedPoint) {
  const auto p = TwinParams::defaults();
  p.validate();
  EXPECT_NEAR(ode_rhs(38.6, 0.0, 68.0, p), 0.0, 1e-9);
  EXPECT_GT(ode_rhs(38.6, 0.0, 84.0, p), 0.0);
  EXPECT_GT(ode_rhs(38.6, 1.0, 68.0, p), 0.0);
  EXPECT_LT(ode_rhs(40.0, 0.0, 68.0, p), 0.0);
}

TEST(TwinModel, AnalyticDerivativesMatchFiniteDifferences) {
  auto p = TwinParams::defaults();
  p[P::T_set] = 38.9;
  const double t = 39.2, a = 0.6, thi = 77.0;
  const auto grad = ode_param_gradient(t, a, thi, p);
  for (std::size_t j = 0; j < P::kCount; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
    const double fd = oracle::central_difference(
        [&](const std::array<double, P::kCount>& v) {
          TwinParams q = p;
          q.value = v;
          return ode_rhs(t, a, thi, q);
        },
        p.value, j, h);
    EXPECT_NEAR(grad[j], fd, 1e-7 * std::max(1.0, std::abs(fd))) << TwinParams::name(j);
  }
  const double fd_t = (ode_rhs(t + 1e-6, a, thi, p) - ode_rhs(t - 1e-6, a, thi, p)) / 2e-6;
  EXPECT_NEAR(ode_drhs_dT(p), fd_t, 1e-8);
}

TEST(TwinModel, EulerTracksRk4OverTwoHours) {
  const auto p = TwinParams::defaults();
  std::vector<double> act(120), thi(120);
  for (std::size_t i = 0; i < act.size(); ++i) {
    act[i] = 0.5 + 0.5 * std::sin(static_cast<double>(i) / 9.0);
    thi[i] = 75.0 + 6.0 * std::sin(static_cast<double>(i) / 40.0);
  }
  const auto rk = oracle::rk4_rollout(38.4, act, thi, p);
  double t = 38.4;
  for (std::size_t i = 0; i < act.size(); ++i) {
    t = euler_step(t, act[i], thi[i], p);
    EXPECT_NEAR(t, rk[i + 1], 0.02);
  }
}

TEST(TwinModel, EulerClampsToPhysiologicalRange) {
  auto p = TwinParams::defaults();
  ClampCounter c;
  ASSERT_GT(ode_rhs(38.6, 1.0, 100.0, p), 0.0);
  ASSERT_LT(ode_rhs(42.5, 0.0, 20.0, p), 0.0);
  EXPECT_DOUBLE_EQ(euler_step(38.6, 1.0, 100.0, p, 1e4, &c), kCoreMax);
  EXPECT_DOUBLE_EQ(euler_step(42.5, 0.0, 20.0, p, 1e4, &c), kCoreMin);
  EXPECT_EQ(c.events, 2u);
}

TEST(TwinModel, ParamsValidateAndRoundTrip) {
  auto p = TwinParams::defaults();
  p[P::C] = 100.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.clamp_to_bounds();
  EXPECT_DOUBLE_EQ(p[P::C], p.lo[P::C]);
  p[P::k_d] = 21.123456789012345;
  std::stringstream ss;
  write_params(ss, p);
  EXPECT_EQ(read_params(ss), p);
  std::stringstream bad("TWINPARAMS v0\n");
  EXPECT_THROW((void)read_params(bad), VersionError);
}

TEST(BehaviorModelTest, ModulatedRowsStayStochastic) {
  const auto bm = BehaviorModel::defaults();
  bm.validate();
  for (int h = 0; h < 24; h += 5)
    for (double thi : {60.0, 72.0, 85.0}) {
      const Eigen::Matrix4d m = bm.modulated(h, thi);
      for (int r = 0; r < 4; ++r) EXPECT_NEAR(m.row(r).sum(), 1.0, 1e-12);
      EXPECT_GE(m.minCoeff(), 0.0);
    }
  EXPECT_GT(bm.psi_env(85.0)[1], bm.psi_env(70.0)[1]);
}

TEST(BehaviorModelTest, MarkovStepConservesMassAndStationaryIsFixed) {
  const auto bm = BehaviorModel::defaults();
  BehaviorDist d{1.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < 50; ++i) d = markov_step(d, i % 24, 70.0, bm);
  EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12);
  const auto pi = stationary_distribution(bm);
  const Eigen::Vector4d v = Eigen::Map<const Eigen::Vector4d>(pi.data());
  const Eigen::Vector4d next = bm.M.transpose() * v;
  EXPECT_LT((next - v).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BehaviorModelTest, RejectsBadMatrix) {
  auto bm = BehaviorModel::defaults();
  bm.M(0, 0) += 0.5;
  EXPECT_THROW(bm.validate(), ConfigError);
}
