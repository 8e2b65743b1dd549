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

#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "herdtwin/timeseries.hpp"

namespace herdtwin {

enum class FeatureGroupId : std::uint8_t {
  phys_cbt,
  behav_ankle,
  behav_immu,
  behav_uwb,
  env_weather,
  prod_milk,
  global_time,
  dt_features,
};

/// Canonical group order, used for manifests, meta columns and report tables.
inline constexpr std::array<FeatureGroupId, 8> kAllGroups = {
    FeatureGroupId::phys_cbt,    FeatureGroupId::behav_ankle, FeatureGroupId::behav_immu,  FeatureGroupId::behav_uwb,
    FeatureGroupId::env_weather, FeatureGroupId::prod_milk,   FeatureGroupId::global_time, FeatureGroupId::dt_features,
};

std::string_view to_string(FeatureGroupId g);
/// Throws ConfigError for unknown names.
FeatureGroupId group_from_string(std::string_view name);

struct FeatureGroup {
  FeatureGroupId id;
  std::vector<std::string> columns;

  bool operator==(const FeatureGroup&) const = default;
};

enum class RollingStat : std::uint8_t { mean, std, max, min, var, skew };
inline constexpr std::array<RollingStat, 6> kAllStats = {RollingStat::mean, RollingStat::std, RollingStat::max,
                                                          RollingStat::min,  RollingStat::var, RollingStat::skew};
std::string_view to_string(RollingStat s);

struct FeatureConfig {
  std::vector<int> windows{15, 60, 240};
  int horizon_minutes = 120;
  /// Threshold of the cumulative stress counter.
  double tau = 38.8;
  /// Threshold of the window-max stress label.
  double theta_stress = 38.8;
  double activity_scale = 2.0;
  /// Barn bounding box for the UWB zone grid.
  double barn_x_min = 0.0, barn_x_max = 40.0, barn_y_min = 0.0, barn_y_max = 30.0;
  int zone_grid = 4;

  void validate() const;
};

/// Engineered features of one cow. Every column belongs to exactly one group;
/// the labels are not features.
struct FeatureMatrix {
  std::optional<CowId> cow;
  Timestamp start;
  std::size_t rows = 0;
  std::vector<std::string> names;
  std::vector<Series> columns;
  std::vector<FeatureGroup> groups;
  /// Observed CBT at t + horizon.
  std::vector<std::optional<double>> label_cbt_future;
  /// max CBT over (t, t + horizon] > theta.
  std::vector<std::optional<bool>> label_stress;

  Timestamp time_at(std::size_t r) const { return start + static_cast<std::int64_t>(r); }
  /// Throws SchemaError.
  std::size_t column_index(std::string_view name) const;
  const Series& column(std::string_view name) const { return columns[column_index(name)]; }
  const FeatureGroup& group(FeatureGroupId id) const;
  /// Throws SchemaError when the manifest does not partition the columns.
  void check_manifest() const;

  bool operator==(const FeatureMatrix&) const = default;
};

/// Trailing windows ending at t inclusive, over present values only. Mean,
/// max and min need one value; std and var need two; skew (bias-adjusted)
/// needs three and nonzero variance. Column names are "<prefix>_<w>_<stat>".
std::vector<std::pair<std::string, Series>> rolling_stats(const Series& x, std::string_view prefix,
                                                          const std::vector<int>& windows,
                                                          const std::vector<RollingStat>& stats);

/// sin_hour, cos_hour, day_of_week (Monday = 0) of consecutive minutes from start.
std::vector<std::pair<std::string, Series>> temporal_encoding(Timestamp start, std::size_t n);

/// dcbt_dt[t] = cbt[t] - cbt[t-1]; delta_thi[t] = cbt[t] - thi[t].
std::vector<std::pair<std::string, Series>> physiological_derivatives(const Series& cbt, const Series& thi);

/// Running count of minutes with cbt > tau; missing minutes add 0.
Series cumulative_stress(const Series& cbt, double tau);

/// UWB zone id on a zone_grid x zone_grid grid over the barn box.
std::optional<double> uwb_zone(double x, double y, const FeatureConfig& cfg);

/// thi_indoor_minus_outdoor, cbt_times_activity, speed_times_zone, activity_times_delta_thi
/// plus the derived activity, uwb_speed, uwb_zone and thi_outdoor columns they build on.
std::vector<std::pair<std::string, Series>> cross_modal_features(const AlignedFrame& frame, const FeatureConfig& cfg);

/// Full feature matrix with both labels. DT columns are absent when the frame
/// carries no dt_features modality.
FeatureMatrix assemble(const AlignedFrame& frame, const FeatureConfig& cfg = {});

/// Column names assemble() produces, grouped, for a given config.
std::vector<FeatureGroup> feature_manifest(const FeatureConfig& cfg = {});

inline constexpr std::string_view kFeatureMagic = "TWINFEAT v1";
void write_features(std::ostream& out, const FeatureMatrix& fm);
FeatureMatrix read_features(std::istream& in);
void write_features_file(const std::filesystem::path& path, const FeatureMatrix& fm);
FeatureMatrix read_features_file(const std::filesystem::path& path);
/// Flat delimited export: t_utc, group-ordered columns, labels; empty cells are absent.
void write_features_csv(std::ostream& out, const FeatureMatrix& fm);

}  // namespace herdtwin
