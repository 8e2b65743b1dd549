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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "herdtwin/ingest.hpp"
#include "herdtwin/timeseries.hpp"
#include "herdtwin/twin_model.hpp"

namespace herdtwin {

struct DropoutSpec {
  /// Long-run fraction of missing samples, in [0, 1].
  double rate = 0.0;
  /// Mean length of a dropout episode in samples (minutes; days for milk).
  double mean_gap = 1.0;
};

struct ThiProfile {
  double base = 70.0;
  double amplitude = 6.0;
  /// UTC hour of the daily THI maximum.
  double peak_hour = 15.0;
  /// Probability that a heat wave starts on a given day.
  double heat_wave_prob = 0.3;
  /// Peak THI increase of a heat wave.
  double heat_wave_amplitude = 8.0;
  double heat_wave_min_hours = 12.0;
  double heat_wave_max_hours = 48.0;
};

struct SynthConfig {
  int n_cows = 8;
  int days = 14;
  std::uint64_t seed = 42;
  /// First simulated minute (UTC). Must fall on a UTC midnight.
  Timestamp start{28'622'880};  // 2024-06-03T00:00Z (Monday)
  int tz_offset_minutes = 120;
  /// Relative spread of the per-cow true parameters around the defaults.
  double param_spread = 0.08;
  /// Absolute spread of T_set in degC.
  double t_set_spread = 0.15;
  TwinParams base_params = TwinParams::defaults();
  BehaviorModel behavior = default_behavior();
  ThiProfile thi;
  /// Observation-noise std per modality. For ankle the value is a flip probability.
  std::map<ModalityId, double> noise = default_noise();
  std::map<ModalityId, DropoutSpec> dropout = default_dropout();
  int immu_period_seconds = 20;
  double activity_scale = 2.0;

  static BehaviorModel default_behavior();
  static std::map<ModalityId, double> default_noise();
  static std::map<ModalityId, DropoutSpec> default_dropout();
  /// Zero noise and zero dropout on every modality.
  void make_noiseless();
  /// Throws ConfigError.
  void validate() const;
};

struct SynthCow {
  CowId id;
  TwinParams true_params;
  std::vector<double> latent_cbt;
  std::vector<double> latent_activity;
  std::vector<Behavior> behavior;
};

struct SynthHerd {
  SynthConfig config;
  Timestamp start;
  std::size_t minutes = 0;
  std::vector<double> latent_thi;
  std::vector<SynthCow> cows;
  /// Raw records per modality in the sensor file format.
  std::map<ModalityId, std::vector<RawRecord>> raw;

  /// Latent CBT / THI of one cow as a frame (modalities cbt and thi).
  AlignedFrame truth_frame(std::size_t cow) const;
};

/// Deterministic given cfg.seed; per-cow streams make the result independent
/// of the worker count.
SynthHerd simulate_herd(const SynthConfig& cfg);

/// Writes raw/<modality>.csv, truth/<cow>.frame and truth/<cow>.params under dir.
void write_herd(const SynthHerd& herd, const std::filesystem::path& dir);

/// Ingests the herd's raw records in memory (same path as files on disk).
std::vector<AlignedFrame> herd_frames(const SynthHerd& herd, const IngestConfig& cfg = {});

/// label[t] = max(cbt over (t, t + horizon]) > theta over present values;
/// nullopt when the horizon leaves the series or holds no value.
std::vector<std::optional<bool>> label_stress_windows(const Series& cbt, double theta, int horizon);

/// Outdoor THI from air temperature (degC) and relative humidity (%).
double thi_from_weather(double air_temp, double rel_humidity);

}  // namespace herdtwin
