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
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string_view>

#include <Eigen/Core>

namespace herdtwin {

/// Physiological parameters of the thermal energy balance. Index order is
/// fixed and used by the feedback gradient and the TWINPARAMS format.
struct TwinParams {
  static constexpr std::size_t kCount = 10;
  enum Index : std::size_t { alpha, beta, C, k_d, T_set, k_th, M_basal, gamma, teff_c0, teff_c1 };

  std::array<double, kCount> value{};
  std::array<double, kCount> lo{};
  std::array<double, kCount> hi{};

  static TwinParams defaults();
  static std::string_view name(std::size_t i);

  double operator[](std::size_t i) const { return value[i]; }
  double& operator[](std::size_t i) { return value[i]; }
  double width(std::size_t i) const { return hi[i] - lo[i]; }
  void clamp_to_bounds();
  /// Throws ConfigError if any value lies outside its bounds or C <= 0.
  void validate() const;

  bool operator==(const TwinParams&) const = default;
};

inline constexpr double kCoreMin = 35.0;
inline constexpr double kCoreMax = 43.0;

/// dT/dt in degC/min:
/// ((M + gamma A) alpha + k_th (c0 + c1 THI - T) - k_d (T - T_set) beta) / C.
double ode_rhs(double t_core, double activity, double thi, const TwinParams& p);
/// Numerator of ode_rhs (net heat flow, kJ/min).
double ode_numerator(double t_core, double activity, double thi, const TwinParams& p);
/// d rhs / d T_core = -(k_th + k_d beta) / C.
double ode_drhs_dT(const TwinParams& p);
/// d rhs / d theta_j for every parameter, in TwinParams index order.
std::array<double, TwinParams::kCount> ode_param_gradient(double t_core, double activity, double thi,
                                                          const TwinParams& p);

struct ClampCounter {
  std::size_t events = 0;
};

/// T + dt * rhs, clamped to [35, 43] degC.
double euler_step(double t_core, double activity, double thi, const TwinParams& p, double dt_minutes = 1.0,
                  ClampCounter* clamps = nullptr);

enum class Behavior : std::size_t { lying = 0, standing = 1, walking = 2, feeding = 3 };
inline constexpr std::size_t kBehaviorCount = 4;
using BehaviorDist = std::array<double, kBehaviorCount>;
std::string_view to_string(Behavior b);

/// Row-stochastic per-minute transition matrix modulated by hour of day and THI.
struct BehaviorModel {
  Eigen::Matrix4d M;
  /// Per-hour, per-destination-state multipliers.
  std::array<std::array<double, kBehaviorCount>, 24> phi_hour;
  /// psi_env raises the standing multiplier by psi_slope per THI unit above psi_threshold.
  double psi_threshold = 72.0;
  double psi_slope = 0.05;
  /// Mean activity level emitted in each state.
  BehaviorDist activity_mean{0.0, 0.2, 1.0, 0.5};
  /// Std of an activity observation around its state mean.
  double activity_std = 0.15;

  static BehaviorModel defaults();
  BehaviorDist psi_env(double thi) const;
  /// M with each row scaled elementwise by phi_hour[hour] and psi_env(thi), then row-normalized.
  Eigen::Matrix4d modulated(int hour, double thi) const;
  double expected_activity(const BehaviorDist& dist) const;
  /// Throws ConfigError when rows do not sum to 1 or multipliers are not positive.
  void validate() const;
};

/// dist' = dist^T * M~(hour, thi).
BehaviorDist markov_step(const BehaviorDist& dist, int hour, double thi, const BehaviorModel& bm);
/// Stationary distribution of the unmodulated matrix (power iteration).
BehaviorDist stationary_distribution(const BehaviorModel& bm);

inline constexpr std::string_view kParamsMagic = "TWINPARAMS v1";

/// Key-value text format: magic line, then "<name> <value> <lo> <hi>" per parameter.
void write_params(std::ostream& out, const TwinParams& p);
TwinParams read_params(std::istream& in);
void write_params_file(const std::filesystem::path& path, const TwinParams& p);
TwinParams read_params_file(const std::filesystem::path& path);

}  // namespace herdtwin
