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
#include <herdtwin/frame_io.hpp>
#include <herdtwin/synth.hpp>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace herdtwin;
using herdtwin::testing::series_of;

TEST(Synth, SameSeedSameHerd) {
  const auto cfg = herdtwin::testing::small_herd(2, 1, 5);
  const auto a = simulate_herd(cfg);
  const auto b = simulate_herd(cfg);
  ASSERT_EQ(a.raw.size(), b.raw.size());
  for (const auto& [m, recs] : a.raw) {
    const auto& other = b.raw.at(m);
    ASSERT_EQ(recs.size(), other.size()) << to_string(m);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      ASSERT_EQ(recs[i].local_time, other[i].local_time);
      ASSERT_EQ(recs[i].values, other[i].values);
    }
  }
  EXPECT_EQ(a.cows[1].latent_cbt, b.cows[1].latent_cbt);
  auto cfg2 = cfg;
  cfg2.seed = 6;
  EXPECT_NE(simulate_herd(cfg2).cows[0].latent_cbt, a.cows[0].latent_cbt);
}

TEST(Synth, HerdShapeAndParameterBounds) {
  const auto herd = simulate_herd(herdtwin::testing::small_herd(4, 2, 9));
  EXPECT_EQ(herd.minutes, 2u * 1440u);
  ASSERT_EQ(herd.cows.size(), 4u);
  EXPECT_EQ(herd.cows[0].id.str(), "cow01");
  for (const auto& c : herd.cows) {
    c.true_params.validate();
    EXPECT_EQ(c.latent_cbt.size(), herd.minutes);
    for (double v : c.latent_cbt) {
      EXPECT_GE(v, kCoreMin);
      EXPECT_LE(v, kCoreMax);
    }
  }
  EXPECT_NE(herd.cows[0].true_params, herd.cows[1].true_params);
  for (ModalityId m : kSensorModalities) EXPECT_FALSE(herd.raw.at(m).empty()) << to_string(m);
}

TEST(Synth, NoiselessObservationsEqualLatentCbt) {
  auto cfg = herdtwin::testing::small_herd(1, 1, 3);
  cfg.make_noiseless();
  const auto herd = simulate_herd(cfg);
  const auto frame = herd_frames(herd)[0];
  const auto& cbt = frame.channel(ModalityId::cbt, "cbt");
  ASSERT_EQ(cbt.count_present(), herd.minutes);
  for (std::size_t t = 0; t < herd.minutes; ++t) EXPECT_NEAR(cbt.value(t), herd.cows[0].latent_cbt[t], 1e-9);
}

TEST(Synth, DiskLayoutMatchesInMemoryIngest) {
  const auto herd = simulate_herd(herdtwin::testing::small_herd(2, 1, 4));
  herdtwin::testing::TempDir dir("synth");
  write_herd(herd, dir.path());
  for (ModalityId m : kSensorModalities)
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "raw" / (std::string(to_string(m)) + ".csv")));
  const auto truth = read_frame_file(dir.path() / "truth" / "cow01.frame");
  EXPECT_EQ(truth, herd.truth_frame(0));
  const auto from_disk = ingest_directory(dir.path(), {});
  const auto in_memory = herd_frames(herd);
  ASSERT_EQ(from_disk.size(), in_memory.size());
  for (std::size_t i = 0; i < in_memory.size(); ++i) {
    const auto& a = from_disk[i].channel(ModalityId::cbt, "cbt");
    const auto& b = in_memory[i].channel(ModalityId::cbt, "cbt");
    ASSERT_EQ(a.presence(), b.presence());
    for (std::size_t t = 0; t < a.size(); ++t)
      if (a.has(t)) ASSERT_NEAR(a.value(t), b.value(t), 1e-9);
  }
}

TEST(Synth, StressLabelsMatchNaiveWindowMax) {
  Series cbt(300);
  for (std::size_t t = 0; t < cbt.size(); ++t)
    if (t % 7 != 3) cbt.set(t, 38.5 + 0.6 * std::sin(static_cast<double>(t) / 17.0));
  for (int h : {1, 5, 120}) {
    const auto got = label_stress_windows(cbt, 38.8, h);
    EXPECT_EQ(got, oracle::naive_stress_labels(cbt, 38.8, static_cast<std::size_t>(h))) << h;
  }
  EXPECT_EQ(label_stress_windows(series_of({38.0, 39.0, std::nullopt}), 38.8, 1),
            (std::vector<std::optional<bool>>{true, std::nullopt, std::nullopt}));
  EXPECT_THROW((void)label_stress_windows(cbt, 38.8, 0), ConfigError);
}

TEST(Synth, ThiFromWeather) {
  EXPECT_NEAR(thi_from_weather(30.0, 50.0), 86.0 - 0.275 * 28.0, 1e-12);
}

TEST(Synth, ConfigValidation) {
  auto cfg = herdtwin::testing::small_herd();
  cfg.n_cows = 0;
  EXPECT_THROW((void)simulate_herd(cfg), ConfigError);
  cfg = herdtwin::testing::small_herd();
  cfg.start = cfg.start + 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
