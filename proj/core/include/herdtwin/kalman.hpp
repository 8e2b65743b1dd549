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

#include <optional>

#include <Eigen/Core>

#include "herdtwin/timeseries.hpp"
#include "herdtwin/twin_model.hpp"

namespace herdtwin {

/// Kalman state [T_core, dT_core/dt, A_level] with covariance and behavior belief.
struct TwinState {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Matrix3d P = Eigen::Matrix3d::Identity();
  BehaviorDist behavior{0.25, 0.25, 0.25, 0.25};
  Timestamp t;
};

/// Exogenous inputs of the step being propagated.
struct TwinInputs {
  double thi = 68.0;
  int hour = 0;
};

struct Observation {
  std::optional<double> cbt;
  std::optional<double> activity;
};

struct NoiseModel {
  Eigen::Matrix3d Q;
  double r_cbt = 0.01;
  double r_activity = 0.01;

  static NoiseModel defaults();
  /// Rows of the selector matrix for the observations that are present.
  Eigen::MatrixXd selector(const Observation& obs) const;
  void validate() const;
};

/// Jacobian of the one-step map: dT'/dT exact, dT'/dA = dt gamma alpha / C,
/// dT and A rows treated as driven states (zero rows).
Eigen::Matrix3d transition_jacobian(const TwinParams& p, double dt_minutes = 1.0);

TwinState kalman_predict(const TwinState& state, const TwinInputs& in, const TwinParams& p, const BehaviorModel& bm,
                         const NoiseModel& noise, double dt_minutes = 1.0, ClampCounter* clamps = nullptr);

/// Standard covariance-form update over the present observations only.
/// Throws NumericalError when the innovation covariance is singular.
TwinState kalman_update(const TwinState& prior, const Observation& obs, const NoiseModel& noise);

/// Bayes correction of the behavior belief with an activity observation,
/// using Gaussian emissions around the per-state activity means.
BehaviorDist behavior_correct(const BehaviorDist& dist, double activity, const BehaviorModel& bm);

}  // namespace herdtwin
