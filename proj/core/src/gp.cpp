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

#include "herdtwin/gp.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "herdtwin/errors.hpp"

namespace herdtwin {

namespace {

constexpr std::array<double, 5> kJitterLadder = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};

}  // namespace

void GpConfig::validate() const {
  if (!(sigma_c2 > 0.0) || !(length_scale > 0.0) || !(sigma_n2 >= 0.0))
    throw ConfigError("GP hyperparameters must satisfy sigma_c2 > 0, length_scale > 0, sigma_n2 >= 0");
  if (window < 1) throw ConfigError("GP window must hold at least one point");
  if (push_every < 1) throw ConfigError("GP push_every must be >= 1");
  if (refit_every_minutes < 0) throw ConfigError("GP refit_every_minutes must be >= 0");
  if (!(thi_scale > 0.0) || !(activity_scale > 0.0)) throw ConfigError("GP input scales must be > 0");
}

GpInput gp_input(double thi, double hour, double activity, const GpConfig& cfg) {
  const double angle = 2.0 * std::numbers::pi * hour / 24.0;
  return {(thi - cfg.thi_center) / cfg.thi_scale, std::sin(angle), std::cos(angle),
          (activity - cfg.activity_center) / cfg.activity_scale};
}

double rbf_kernel(const GpInput& a, const GpInput& b, double sigma_c2, double length_scale) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return sigma_c2 * std::exp(-0.5 * d2 / (length_scale * length_scale));
}

GpResidualModel::GpResidualModel(GpConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  chol_.resize(static_cast<Eigen::Index>(cfg_.window), static_cast<Eigen::Index>(cfg_.window));
}

void GpResidualModel::refactor() {
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = rbf_kernel(xs_[static_cast<std::size_t>(i)], xs_[static_cast<std::size_t>(j)], cfg_.sigma_c2,
                                  cfg_.length_scale);
      k(i, j) = v;
      k(j, i) = v;
    }
  k.diagonal().array() += cfg_.sigma_n2;
  for (double jitter : kJitterLadder) {
    if (jitter < jitter_) continue;
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      jitter_ = jitter;
      chol_.topLeftCorner(n, n) = llt.matrixL();
      update_alpha();
      return;
    }
  }
  throw NumericalError(fmt::format("GP kernel matrix of size {} is not positive definite after jitter {:.0e}", n,
                                   kJitterLadder.back()));
}

void GpResidualModel::update_alpha() {
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = rs_[static_cast<std::size_t>(i)];
  beta_ = chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(r);
}

void GpResidualModel::evict_oldest() {
  // K' = K[1:,1:] = L21 L21^T + L22 L22^T: a rank-1 update of L22 by L21.
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Eigen::VectorXd v = chol_.block(1, 0, n - 1, 1);
  Eigen::MatrixXd l22 = chol_.block(1, 1, n - 1, n - 1).triangularView<Eigen::Lower>();
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    const double lkk = l22(k, k);
    const double r = std::hypot(lkk, v(k));
    const double c = r / lkk;
    const double s = v(k) / lkk;
    l22(k, k) = r;
    for (Eigen::Index i = k + 1; i < n - 1; ++i) {
      l22(i, k) = (l22(i, k) + s * v(i)) / c;
      v(i) = c * v(i) - s * l22(i, k);
    }
  }
  chol_.topLeftCorner(n - 1, n - 1) = l22;
  xs_.pop_front();
  rs_.pop_front();
}

void GpResidualModel::push(const GpInput& x, double residual) {
  if (!std::isfinite(residual)) throw NumericalError("GP residual must be finite");
  if (xs_.size() == cfg_.window) evict_oldest();
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kx(i) = rbf_kernel(xs_[static_cast<std::size_t>(i)], x, cfg_.sigma_c2, cfg_.length_scale);
  xs_.push_back(x);
  rs_.push_back(residual);
  const Eigen::VectorXd l = chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(kx);
  const double d = cfg_.sigma_c2 + cfg_.sigma_n2 + jitter_ - l.squaredNorm();
  if (!(d > 1e-12 * (cfg_.sigma_c2 + cfg_.sigma_n2))) {
    refactor();
    return;
  }
  chol_.block(n, 0, 1, n) = l.transpose();
  chol_(n, n) = std::sqrt(d);
  update_alpha();
}

GpPrediction GpResidualModel::predict(const GpInput& x) const {
  const double prior = cfg_.sigma_c2 + cfg_.sigma_n2;
  if (xs_.empty()) return {0.0, std::sqrt(prior)};
  const auto n = static_cast<Eigen::Index>(xs_.size());
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i)
    ks(i) = rbf_kernel(xs_[static_cast<std::size_t>(i)], x, cfg_.sigma_c2, cfg_.length_scale);
  const Eigen::VectorXd v = chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(ks);
  const double var = std::max(0.0, prior - v.squaredNorm());
  return {v.dot(beta_), std::sqrt(var)};
}

double GpResidualModel::log_marginal_likelihood() const {
  const auto n = static_cast<Eigen::Index>(xs_.size());
  if (n == 0) return 0.0;
  const double logdet = chol_.topLeftCorner(n, n).diagonal().array().log().sum();
  return -0.5 * beta_.squaredNorm() - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

void GpResidualModel::set_hyperparameters(double sigma_c2, double length_scale, double sigma_n2) {
  GpConfig next = cfg_;
  next.sigma_c2 = sigma_c2;
  next.length_scale = length_scale;
  next.sigma_n2 = sigma_n2;
  next.validate();
  cfg_ = next;
  jitter_ = 0.0;
  if (!xs_.empty()) refactor();
}

void GpResidualModel::refit_grid(const GpConfig& base) {
  if (xs_.empty()) return;
  constexpr std::array<double, 3> kScale = {0.5, 1.0, 2.0};
  double best = -INFINITY;
  std::array<double, 3> best_h{base.sigma_c2, base.length_scale, base.sigma_n2};
  for (double a : kScale)
    for (double b : kScale)
      for (double c : kScale) {
        set_hyperparameters(base.sigma_c2 * a, base.length_scale * b, base.sigma_n2 * c);
        const double lml = log_marginal_likelihood();
        if (lml > best) {
          best = lml;
          best_h = {cfg_.sigma_c2, cfg_.length_scale, cfg_.sigma_n2};
        }
      }
  set_hyperparameters(best_h[0], best_h[1], best_h[2]);
}

}  // namespace herdtwin
