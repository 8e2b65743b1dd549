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

#include <herdtwin/binary_io.hpp>
#include <herdtwin/errors.hpp>
#include <herdtwin/metrics.hpp>
#include <herdtwin/rng.hpp>
#include <herdtwin/uncertainty.hpp>

#include <gtest/gtest.h>

#include <sstream>

#include "toy_data.hpp"

using namespace herdtwin;

namespace {

struct CalibrationCase {
  std::vector<double> y_hat, sigma, y;
};

CalibrationCase gaussian_case(double true_scale, std::size_t n = 2000) {
  auto rng = make_rng(21, {});
  CalibrationCase c;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 0.05 + 0.1 * uniform01(rng);
    c.y_hat.push_back(38.6);
    c.sigma.push_back(s);
    c.y.push_back(38.6 + true_scale * s * standard_normal(rng));
  }
  return c;
}

double coverage(const CalibrationCase& c, const CalibrationConstants& cc) {
  std::vector<double> lo, hi;
  for (std::size_t i = 0; i < c.y.size(); ++i) {
    const auto [l, h] = interval(c.y_hat[i], c.sigma[i], cc);
    lo.push_back(l);
    hi.push_back(h);
  }
  return picp(c.y, lo, hi);
}

}  // namespace

TEST(Uncertainty, SampleStd) {
  EXPECT_DOUBLE_EQ(sample_std(std::vector<double>{1, 2, 3, 4}), std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(sample_std(std::vector<double>{2, 2}), 0.0);
}

TEST(Uncertainty, CalibrationPicksSmallestSufficientAlpha) {
  const auto c = gaussian_case(1.5);
  const auto cc = calibrate(c.y_hat, c.sigma, c.y, 0.95, 0.0, 1.96);
  EXPECT_FALSE(cc.under_coverage);
  EXPECT_GE(coverage(c, cc), 0.95);
  auto smaller = cc;
  smaller.alpha -= 0.1;
  EXPECT_LT(coverage(c, smaller), 0.95);
  EXPECT_NEAR(cc.alpha, 1.5, 0.2);
  const auto grid = alpha_grid();
  EXPECT_NE(std::find(grid.begin(), grid.end(), cc.alpha), grid.end());
  EXPECT_EQ(grid.front(), 0.5);
  EXPECT_EQ(grid.back(), 3.0);
}

TEST(Uncertainty, UnreachableTargetFlagsUnderCoverage) {
  const auto c = gaussian_case(5.0);
  const auto cc = calibrate(c.y_hat, c.sigma, c.y, 0.95, 0.0, 1.96);
  EXPECT_TRUE(cc.under_coverage);
  EXPECT_EQ(cc.alpha, 3.0);
  const std::vector<double> few(49, 1.0);
  EXPECT_THROW((void)calibrate(few, few, few), ConfigError);
}

TEST(Uncertainty, WidthMonotoneInAlphaAndFloor) {
  for (double s : {0.0, 0.01, 0.05, 0.2}) {
    double prev = -1.0;
    for (double a : alpha_grid()) {
      const auto [lo, hi] = interval(38.0, s, {a, 0.03, 1.96, false});
      EXPECT_GE(hi - lo, prev);
      prev = hi - lo;
    }
    prev = -1.0;
    for (double floor : {0.0, 0.01, 0.03, 0.1, 0.5}) {
      const auto [lo, hi] = interval(38.0, s, {1.0, floor, 1.96, false});
      EXPECT_GE(hi - lo, prev);
      EXPECT_NEAR(hi - 38.0, 38.0 - lo, 1e-12);
      prev = hi - lo;
    }
  }
  EXPECT_EQ(sigma_final(0.01, {2.0, 0.03, 1.96, false}), 0.03);
  EXPECT_EQ(sigma_final(0.1, {2.0, 0.03, 1.96, false}), 0.2);
}

TEST(Uncertainty, BootstrapResamplesCows) {
  const auto ds = herdtwin::testing::toy_dataset(5, 40, 2);
  const auto cfg = herdtwin::testing::quick_gbdt();
  const auto bs = bootstrap_fit(ds.x, ds.y, ds.cow_of_row, ds.cows, cfg, 6, 99);
  ASSERT_EQ(bs.size(), 6u);
  bool any_oob = false;
  for (std::size_t b = 0; b < bs.size(); ++b) {
    ASSERT_EQ(bs.replicas[b].draws.size(), 5u);
    for (std::size_t c = 0; c < 5; ++c) {
      const bool drawn = std::count(bs.replicas[b].draws.begin(), bs.replicas[b].draws.end(), c) > 0;
      EXPECT_EQ(bs.out_of_bag(b, c), !drawn);
      any_oob = any_oob || !drawn;
    }
  }
  EXPECT_TRUE(any_oob);
  const auto again = bootstrap_fit(ds.x, ds.y, ds.cow_of_row, ds.cows, cfg, 6, 99);
  for (std::size_t b = 0; b < bs.size(); ++b) EXPECT_EQ(again.replicas[b].model, bs.replicas[b].model);

  const auto preds = replica_predictions(bs, ds.x);
  const auto sig = sigma_raw(bs, ds.x);
  ASSERT_EQ(sig.size(), ds.rows());
  std::vector<double> col;
  for (const auto& p : preds) col.push_back(p[7]);
  EXPECT_DOUBLE_EQ(sig[7], sample_std(col));
  const auto oob = sigma_raw_oob(bs, ds.x, ds.cow_of_row);
  ASSERT_EQ(oob.size(), ds.rows());
  for (double v : oob) EXPECT_GE(v, 0.0);

  std::stringstream ss;
  BinaryWriter w(ss);
  write_bootstrap_body(w, bs);
  BinaryReader r(ss);
  const auto back = read_bootstrap_body(r);
  EXPECT_EQ(sigma_raw(back, ds.x), sig);

  EXPECT_THROW((void)bootstrap_fit(ds.x, ds.y, ds.cow_of_row, ds.cows, cfg, 1, 0), ConfigError);
}
