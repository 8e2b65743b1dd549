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
#include <cstdint>
#include <optional>
#include <vector>

#include "herdtwin/gp.hpp"
#include "herdtwin/kalman.hpp"
#include "herdtwin/timeseries.hpp"
#include "herdtwin/twin_model.hpp"

namespace herdtwin {

struct TwinConfig {
  TwinParams params = TwinParams::defaults();
  BehaviorModel behavior = BehaviorModel::defaults();
  NoiseModel noise = NoiseModel::defaults();
  GpConfig gp;
  /// Base step size of the online parameter feedback; scaled per parameter by
  /// the squared bound width.
  double feedback_rate = 1e-3;
  int horizon_minutes = 120;
  double theta_stress = 38.8;
  double stress_slope = 5.0;
  /// Divisor mapping horizontal acceleration magnitude to activity units.
  double activity_scale = 2.0;
  /// THI assumed before the first THI observation.
  double default_thi = 68.0;

  void validate() const;
};

/// Quality bits carried with every emitted feature vector.
enum TwinQuality : std::uint8_t {
  kCbtObserved = 1,
  kActivityObserved = 2,
  kThiObserved = 4,
  kClamped = 8,
  kGpEmpty = 16,
};

struct DtFeatureVector {
  double t_cbt_hat = 0.0;
  double t_future_hat = 0.0;
  double p_stress = 0.0;
  BehaviorDist p_behavior{};
  double sigma_uncertainty = 0.0;
  std::uint8_t quality = 0;
};

struct TwinRun {
  std::vector<DtFeatureVector> features;
  /// Observed CBT minus the one-step prior prediction; absent when CBT is missing.
  std::vector<std::optional<double>> one_step_residual;
  TwinParams final_params;
  std::size_t clamp_events = 0;
};

/// Activity level from the horizontal IMMU acceleration means.
double activity_from_immu(double acc_x, double acc_y, double scale);
/// Per-minute activity observations of a frame (absent where IMMU is missing).
std::vector<std::optional<double>> activity_series(const AlignedFrame& frame, double scale);

struct FeedbackGradient {
  std::array<double, TwinParams::kCount> dloss{};
  double error = 0.0;
};

/// Gradient of L = (y - T_pred)^2 where T_pred = T + dt rhs(T, A, THI; theta)
/// is the one-step prediction issued from the previous posterior.
FeedbackGradient feedback_gradient(double t_prev, double activity_prev, double thi_prev, const TwinParams& p,
                                   double observed, double dt_minutes = 1.0);
/// theta_j <- clamp(theta_j - rate * width_j^2 * dL/dtheta_j).
TwinParams feedback_update(const TwinParams& p, const FeedbackGradient& grad, double rate);

double stress_sigmoid(double t_core, double theta, double slope);

/// Strictly forward twin pass over a 1-minute frame. Output at minute t uses
/// frame content at minutes <= t only.
TwinRun run_twin(const AlignedFrame& frame, const TwinConfig& cfg);

/// The eight dt_features channels, in canonical order.
std::vector<Channel> dt_channels(const TwinRun& run);
AlignedFrame attach_dt_features(const AlignedFrame& frame, const TwinRun& run);

}  // namespace herdtwin
