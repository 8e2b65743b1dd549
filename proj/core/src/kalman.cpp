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

#include "herdtwin/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "herdtwin/errors.hpp"

namespace herdtwin {

NoiseModel NoiseModel::defaults() {
  NoiseModel n;
  n.Q = Eigen::Vector3d(1e-4, 1e-6, 0.05).asDiagonal();
  return n;
}

Eigen::MatrixXd NoiseModel::selector(const Observation& obs) const {
  const int rows = (obs.cbt ? 1 : 0) + (obs.activity ? 1 : 0);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(rows, 3);
  int r = 0;
  if (obs.cbt) h(r++, 0) = 1.0;
  if (obs.activity) h(r++, 2) = 1.0;
  return h;
}

void NoiseModel::validate() const {
  if (!Q.isApprox(Q.transpose())) throw ConfigError("process covariance Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q);
  if (es.eigenvalues().minCoeff() < -1e-12) throw ConfigError("process covariance Q must be positive semidefinite");
  if (r_cbt < 0.0 || r_activity < 0.0) throw ConfigError("measurement variances must be >= 0");
}

Eigen::Matrix3d transition_jacobian(const TwinParams& p, double dt) {
  using P = TwinParams;
  Eigen::Matrix3d f = Eigen::Matrix3d::Zero();
  f(0, 0) = 1.0 + dt * ode_drhs_dT(p);
  f(0, 2) = dt * p[P::gamma] * p[P::alpha] / p[P::C];
  return f;
}

TwinState kalman_predict(const TwinState& state, const TwinInputs& in, const TwinParams& p, const BehaviorModel& bm,
                         const NoiseModel& noise, double dt, ClampCounter* clamps) {
  TwinState out;
  out.t = state.t + static_cast<std::int64_t>(std::llround(dt));
  const double t_next = euler_step(state.x(0), state.x(2), in.thi, p, dt, clamps);
  out.behavior = markov_step(state.behavior, in.hour, in.thi, bm);
  const double a_next = bm.expected_activity(out.behavior);
  out.x << t_next, ode_rhs(t_next, a_next, in.thi, p), a_next;
  const Eigen::Matrix3d f = transition_jacobian(p, dt);
  out.P = f * state.P * f.transpose() + noise.Q;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

TwinState kalman_update(const TwinState& prior, const Observation& obs, const NoiseModel& noise) {
  const Eigen::MatrixXd h = noise.selector(obs);
  if (h.rows() == 0) return prior;
  Eigen::VectorXd y(h.rows());
  Eigen::VectorXd r(h.rows());
  int i = 0;
  if (obs.cbt) {
    y(i) = *obs.cbt;
    r(i++) = noise.r_cbt;
  }
  if (obs.activity) {
    y(i) = *obs.activity;
    r(i++) = noise.r_activity;
  }
  const Eigen::MatrixXd s = h * prior.P * h.transpose() + Eigen::MatrixXd(r.asDiagonal());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  if (!(emin > 0.0) || emax / emin > 1e14)
    throw NumericalError(fmt::format("singular innovation covariance (eigenvalues [{:.3g}, {:.3g}], condition {:.3g})",
                                     emin, emax, emin > 0.0 ? emax / emin : INFINITY));
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  const Eigen::MatrixXd k = llt.solve(h * prior.P).transpose();
  TwinState post = prior;
  post.x += k * (y - h * prior.x);
  post.x(0) = std::clamp(post.x(0), kCoreMin, kCoreMax);
  post.P = (Eigen::Matrix3d::Identity() - k * h) * prior.P;
  post.P = 0.5 * (post.P + post.P.transpose()).eval();
  return post;
}

BehaviorDist behavior_correct(const BehaviorDist& dist, double activity, const BehaviorModel& bm) {
  std::array<double, kBehaviorCount> logw{};
  double best = -INFINITY;
  for (std::size_t s = 0; s < kBehaviorCount; ++s) {
    const double z = (activity - bm.activity_mean[s]) / bm.activity_std;
    logw[s] = dist[s] > 0.0 ? std::log(dist[s]) - 0.5 * z * z : -INFINITY;
    best = std::max(best, logw[s]);
  }
  if (!std::isfinite(best)) return dist;
  BehaviorDist out{};
  double sum = 0.0;
  for (std::size_t s = 0; s < kBehaviorCount; ++s) {
    out[s] = std::isfinite(logw[s]) ? std::exp(logw[s] - best) : 0.0;
    sum += out[s];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace herdtwin
