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
#include <herdtwin/features.hpp>
#include <herdtwin/rng.hpp>
#include <herdtwin/synth.hpp>
#include <herdtwin/twin.hpp>

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace herdtwin;
using herdtwin::testing::series_of;

namespace {

void expect_opt_near(const Series& s, std::size_t t, const std::optional<double>& want, double tol,
                     const std::string& what) {
  ASSERT_EQ(s.has(t), want.has_value()) << what << " at " << t;
  if (want) EXPECT_NEAR(s.value(t), *want, tol * std::max(1.0, std::abs(*want))) << what << " at " << t;
}

}  // namespace

TEST(Features, RollingStatsMatchNaiveWindows) {
  auto rng = make_rng(17, {});
  Series x(400);
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (uniform01(rng) < 0.2) continue;
    x.set(t, uniform01(rng) < 0.05 ? 40.0 : 38.5 + 0.3 * standard_normal(rng));
  }
  for (std::size_t t = 100; t < 130; ++t) x.set(t, 38.0);  // constant stretch
  const std::vector<int> windows{1, 3, 15, 60};
  const auto cols = rolling_stats(x, "x", windows, {kAllStats.begin(), kAllStats.end()});
  ASSERT_EQ(cols.size(), windows.size() * kAllStats.size());
  std::size_t k = 0;
  for (int w : windows)
    for (RollingStat st : kAllStats) {
      const auto& [name, s] = cols[k++];
      EXPECT_EQ(name, "x_" + std::to_string(w) + "_" + std::string(to_string(st)));
      for (std::size_t t = 0; t < x.size(); ++t) {
        const auto n = oracle::naive_window(x, t, static_cast<std::size_t>(w));
        const std::optional<double> want = st == RollingStat::mean   ? n.mean
                                           : st == RollingStat::std  ? n.std
                                           : st == RollingStat::max  ? n.max
                                           : st == RollingStat::min  ? n.min
                                           : st == RollingStat::var  ? n.var
                                                                     : n.skew;
        expect_opt_near(s, t, want, 1e-9, name);
      }
    }
}

TEST(Features, SimpleDerivedColumns) {
  const auto cbt = series_of({38.0, 39.0, std::nullopt, 39.5, 38.9});
  const auto thi = series_of({70.0, std::nullopt, 72.0, 73.0, 74.0});
  const auto d = physiological_derivatives(cbt, thi);
  EXPECT_EQ(d[0].second, series_of({std::nullopt, 1.0, std::nullopt, std::nullopt, 38.9 - 39.5}));
  EXPECT_EQ(d[1].second, series_of({38.0 - 70.0, std::nullopt, std::nullopt, 39.5 - 73.0, 38.9 - 74.0}));
  EXPECT_EQ(cumulative_stress(cbt, 38.8), series_of({0.0, 1.0, 1.0, 2.0, 3.0}));

  const auto enc = temporal_encoding(Timestamp{28'622'880 + 360}, 2);
  EXPECT_NEAR(enc[0].second.value(0), 1.0, 1e-15);
  EXPECT_EQ(enc[2].second.value(0), 0.0);

  FeatureConfig cfg;
  EXPECT_EQ(uwb_zone(0.0, 0.0, cfg), 0.0);
  EXPECT_EQ(uwb_zone(40.0, 30.0, cfg), 15.0);
  EXPECT_EQ(uwb_zone(11.0, 8.0, cfg), 5.0);
  EXPECT_FALSE(uwb_zone(-1.0, 3.0, cfg).has_value());
}

class AssembledHerd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    herd_ = new SynthHerd(simulate_herd(herdtwin::testing::small_herd(1, 1, 12)));
    const auto frame = herd_frames(*herd_)[0];
    frame_ = new AlignedFrame(attach_dt_features(frame, run_twin(frame, TwinConfig{})));
  }
  static void TearDownTestSuite() {
    delete herd_;
    delete frame_;
  }
  static SynthHerd* herd_;
  static AlignedFrame* frame_;
};
SynthHerd* AssembledHerd::herd_ = nullptr;
AlignedFrame* AssembledHerd::frame_ = nullptr;

TEST_F(AssembledHerd, ManifestPartitionsColumnsInGroupOrder) {
  const auto fm = assemble(*frame_);
  fm.check_manifest();
  EXPECT_EQ(fm.groups, feature_manifest());
  std::set<std::string> seen;
  std::size_t count = 0;
  for (std::size_t g = 0; g < fm.groups.size(); ++g) {
    EXPECT_EQ(fm.groups[g].id, kAllGroups[g]);
    for (const auto& c : fm.groups[g].columns) {
      EXPECT_TRUE(seen.insert(c).second) << c;
      ++count;
    }
  }
  EXPECT_EQ(count, fm.names.size());
  for (const auto& n : fm.names) EXPECT_EQ(n.find("label"), std::string::npos);

  const auto no_dt = assemble(herd_frames(*herd_)[0]);
  EXPECT_EQ(no_dt.names, fm.names);
  for (const auto& c : no_dt.group(FeatureGroupId::dt_features).columns)
    EXPECT_EQ(no_dt.column(c).count_present(), 0u) << c;
}

TEST_F(AssembledHerd, LabelsLookAhead) {
  const auto fm = assemble(*frame_);
  const auto& cbt = frame_->channel(ModalityId::cbt, "cbt");
  for (std::size_t t = 0; t < fm.rows; ++t) {
    if (t + 120 < fm.rows)
      ASSERT_EQ(fm.label_cbt_future[t], cbt.at(t + 120));
    else
      ASSERT_FALSE(fm.label_cbt_future[t].has_value());
  }
  EXPECT_EQ(fm.label_stress, oracle::naive_stress_labels(cbt, 38.8, 120));
}

TEST_F(AssembledHerd, FeaturesAtTIgnoreLaterMinutes) {
  const auto full = assemble(*frame_);
  for (std::size_t t : {0u, 59u, 600u, 1000u}) {
    const auto part = assemble(slice_window(*frame_, frame_->time_at(t), t + 1));
    ASSERT_EQ(part.names, full.names);
    for (std::size_t c = 0; c < full.columns.size(); ++c)
      for (std::size_t i = 0; i <= t; ++i) {
        ASSERT_EQ(part.columns[c].has(i), full.columns[c].has(i)) << full.names[c] << " " << i;
        if (full.columns[c].has(i)) ASSERT_EQ(part.columns[c].value(i), full.columns[c].value(i)) << full.names[c];
      }
  }
}

TEST_F(AssembledHerd, FileAndCsvRoundTrip) {
  const auto fm = assemble(*frame_);
  std::stringstream ss;
  write_features(ss, fm);
  EXPECT_EQ(read_features(ss), fm);
  std::ostringstream csv;
  write_features_csv(csv, fm);
  const std::string text = csv.str();
  const auto header = text.substr(0, text.find('\n'));
  EXPECT_EQ(header.rfind("t_utc,", 0), 0u);
  EXPECT_NE(header.find("label_stress"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), fm.rows + 1);
}

TEST(FeaturesConfig, Validation) {
  FeatureConfig cfg;
  cfg.windows = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.horizon_minutes = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW((void)group_from_string("sound"), ConfigError);
  for (auto g : kAllGroups) EXPECT_EQ(group_from_string(to_string(g)), g);
}
