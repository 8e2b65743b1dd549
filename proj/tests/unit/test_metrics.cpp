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
#include <herdtwin/metrics.hpp>
#include <herdtwin/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

using namespace herdtwin;

TEST(Metrics, HandArithmetic) {
  const std::vector<double> y{1, 2, 3}, p{1, 2, 5};
  EXPECT_NEAR(mae(y, p), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(rmse(y, p), std::sqrt(4.0 / 3.0), 1e-12);
  EXPECT_DOUBLE_EQ(*r_squared(y, y), 1.0);
  EXPECT_DOUBLE_EQ(*r_squared(y, std::vector<double>{2, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(mae(y, y), 0.0);
  EXPECT_FALSE(r_squared(std::vector<double>{4, 4}, std::vector<double>{4, 5}).has_value());
}

TEST(Metrics, RmseDominatesMae) {
  auto rng = make_rng(8, {});
  for (int i = 0; i < 50; ++i) {
    std::vector<double> y(20), p(20);
    for (std::size_t j = 0; j < 20; ++j) {
      y[j] = standard_normal(rng);
      p[j] = standard_normal(rng);
    }
    EXPECT_GE(rmse(y, p) + 1e-15, mae(y, p));
  }
}

TEST(Metrics, IntervalCoverageCountsInclusiveBounds) {
  const std::vector<double> y{1, 2, 3, 4}, lo{1, 0, 3.5, 0}, hi{2, 1, 4, 4};
  EXPECT_DOUBLE_EQ(picp(y, lo, hi), 0.5);
}

TEST(Metrics, ClassificationCounts) {
  const std::vector<int> t{1, 1, 0, 0, 1, 0}, p{1, 0, 0, 1, 1, 0};
  const auto c = confusion(t, p);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.tn, 2u);
  EXPECT_NEAR(precision(c), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(recall(c), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(f1_score(c), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(accuracy(c), 4.0 / 6.0, 1e-15);
  const auto none = confusion(std::vector<int>{0, 0}, std::vector<int>{0, 0});
  EXPECT_EQ(precision(none), 0.0);
  EXPECT_EQ(f1_score(none), 0.0);
}

TEST(Metrics, AucMatchesMannWhitney) {
  const std::vector<int> t{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(*roc_auc(t, std::vector<double>{0.9, 0.8, 0.2, 0.1}), 1.0);
  EXPECT_DOUBLE_EQ(*roc_auc(t, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 0.0);
  EXPECT_FALSE(roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.2, 0.3}).has_value());
  auto rng = make_rng(9, {});
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> truth(60);
    std::vector<double> score(60);
    for (std::size_t i = 0; i < 60; ++i) {
      truth[i] = uniform01(rng) < 0.3 ? 1 : 0;
      score[i] = std::floor((truth[i] + standard_normal(rng)) * 3.0) / 3.0;  // many ties
    }
    const auto want = oracle::mann_whitney_auc(truth, score);
    const auto got = roc_auc(truth, score);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (want) EXPECT_NEAR(*got, *want, 1e-12);
  }
}

TEST(Metrics, RocCurveIsMonotone) {
  auto rng = make_rng(10, {});
  std::vector<int> truth(100);
  std::vector<double> score(100);
  for (std::size_t i = 0; i < 100; ++i) {
    truth[i] = i % 3 == 0;
    score[i] = truth[i] + standard_normal(rng);
  }
  const auto roc = roc_curve(truth, score);
  ASSERT_GE(roc.size(), 2u);
  EXPECT_EQ(roc.front(), std::make_pair(0.0, 0.0));
  EXPECT_EQ(roc.back(), std::make_pair(1.0, 1.0));
  for (std::size_t i = 1; i < roc.size(); ++i) {
    EXPECT_GE(roc[i].first, roc[i - 1].first);
    EXPECT_GE(roc[i].second, roc[i - 1].second);
  }
}

TEST(Metrics, RejectsMisalignedOrEmpty) {
  EXPECT_THROW((void)mae(std::vector<double>{1}, std::vector<double>{1, 2}), SchemaError);
  EXPECT_THROW((void)rmse(std::vector<double>{}, std::vector<double>{}), SchemaError);
  EXPECT_THROW((void)picp(std::vector<double>{1}, std::vector<double>{0}, std::vector<double>{}), SchemaError);
}
