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
#include <deque>

#include <Eigen/Core>

namespace herdtwin {

struct GpConfig {
  double sigma_c2 = 0.04;
  double length_scale = 1.0;
  double sigma_n2 = 0.01;
  std::size_t window = 256;
  /// Minimum spacing in minutes between residuals pushed into the window.
  int push_every = 5;
  /// Grid refit of the hyperparameters every this many minutes; 0 disables.
  int refit_every_minutes = 0;
  double thi_center = 70.0;
  double thi_scale = 8.0;
  double activity_center = 0.3;
  double activity_scale = 0.4;

  void validate() const;
};

/// Standardized GP input: THI, sin(hour), cos(hour), activity.
using GpInput = std::array<double, 4>;
GpInput gp_input(double thi, double hour, double activity, const GpConfig& cfg);

/// sigma_c2 * exp(-|a - b|^2 / (2 l^2)); the white-noise term is added separately.
double rbf_kernel(const GpInput& a, const GpInput& b, double sigma_c2, double length_scale);

struct GpPrediction {
  double mean = 0.0;
  double std = 0.0;
};

/// Exact GP regression over a bounded ring of (input, residual) pairs. The
/// Cholesky factor of K + sigma_n2 I is maintained incrementally: O(n^2) per
/// append and a rank-1 update when the oldest point is evicted.
class GpResidualModel {
 public:
  explicit GpResidualModel(GpConfig cfg = {});

  void push(const GpInput& x, double residual);
  /// Posterior mean and std of a noisy residual at x. Empty window returns
  /// (0, sqrt(sigma_c2 + sigma_n2)).
  GpPrediction predict(const GpInput& x) const;
  double log_marginal_likelihood() const;
  /// Replaces the kernel hyperparameters and refactors the window.
  void set_hyperparameters(double sigma_c2, double length_scale, double sigma_n2);
  /// Picks the best of a 3x3x3 grid (x0.5, x1, x2 around `base`) by log marginal likelihood.
  void refit_grid(const GpConfig& base);

  std::size_t size() const { return xs_.size(); }
  const GpConfig& config() const { return cfg_; }
  double jitter() const { return jitter_; }
  const std::deque<GpInput>& inputs() const { return xs_; }
  const std::deque<double>& residuals() const { return rs_; }

 private:
  void refactor();
  void update_alpha();
  void evict_oldest();

  GpConfig cfg_;
  std::deque<GpInput> xs_;
  std::deque<double> rs_;
  Eigen::MatrixXd chol_;  // lower factor in the top-left n x n block
  Eigen::VectorXd beta_;  // L^{-1} r
  double jitter_ = 0.0;
};

}  // namespace herdtwin
