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

#include "herdtwin/twin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "herdtwin/errors.hpp"

namespace herdtwin {

void TwinConfig::validate() const {
  params.validate();
  behavior.validate();
  noise.validate();
  gp.validate();
  if (feedback_rate < 0.0) throw ConfigError("twin.feedback_rate must be >= 0");
  if (horizon_minutes < 1) throw ConfigError("twin.horizon_minutes must be >= 1");
  if (!(stress_slope > 0.0)) throw ConfigError("twin.stress_slope must be > 0");
  if (!(activity_scale > 0.0)) throw ConfigError("twin.activity_scale must be > 0");
}

double activity_from_immu(double acc_x, double acc_y, double scale) { return std::hypot(acc_x, acc_y) / scale; }

std::vector<std::optional<double>> activity_series(const AlignedFrame& frame, double scale) {
  std::vector<std::optional<double>> out(frame.length());
  if (!frame.has_modality(ModalityId::immu)) return out;
  const Series& ax = frame.channel(ModalityId::immu, "acc_x");
  const Series& ay = frame.channel(ModalityId::immu, "acc_y");
  for (std::size_t t = 0; t < frame.length(); ++t)
    if (ax.has(t) && ay.has(t)) out[t] = activity_from_immu(ax.value(t), ay.value(t), scale);
  return out;
}

FeedbackGradient feedback_gradient(double t_prev, double activity_prev, double thi_prev, const TwinParams& p,
                                   double observed, double dt) {
  FeedbackGradient g;
  const double pred = t_prev + dt * ode_rhs(t_prev, activity_prev, thi_prev, p);
  g.error = observed - pred;
  const auto drhs = ode_param_gradient(t_prev, activity_prev, thi_prev, p);
  for (std::size_t j = 0; j < TwinParams::kCount; ++j) g.dloss[j] = -2.0 * g.error * dt * drhs[j];
  return g;
}

TwinParams feedback_update(const TwinParams& p, const FeedbackGradient& grad, double rate) {
  TwinParams out = p;
  for (std::size_t j = 0; j < TwinParams::kCount; ++j) {
    const double w = p.width(j);
    out.value[j] -= rate * w * w * grad.dloss[j];
  }
  out.clamp_to_bounds();
  return out;
}

double stress_sigmoid(double t_core, double theta, double slope) {
  return 1.0 / (1.0 + std::exp(-slope * (t_core - theta)));
}

namespace {

const Series* find_channel(const AlignedFrame& frame, ModalityId m, std::string_view name) {
  if (!frame.has_modality(m)) return nullptr;
  for (const auto& ch : frame.block(m).channels)
    if (ch.name == name) return &ch.values;
  return nullptr;
}

struct IssuedRollout {
  bool valid = false;
  double t_end = 0.0;
  GpInput x{};
};

}  // namespace

TwinRun run_twin(const AlignedFrame& frame, const TwinConfig& cfg) {
  cfg.validate();
  if (frame.step_minutes() != 1)
    throw ResolutionError(fmt::format("twin requires a 1-minute frame, got step {}", frame.step_minutes()));
  const std::size_t n = frame.length();
  const Series* cbt = find_channel(frame, ModalityId::cbt, "cbt");
  const Series* thi = find_channel(frame, ModalityId::thi, "thi");
  const auto activity = activity_series(frame, cfg.activity_scale);
  const int h = cfg.horizon_minutes;

  TwinRun run;
  run.features.resize(n);
  run.one_step_residual.resize(n);
  TwinParams p = cfg.params;
  GpResidualModel gp(cfg.gp);
  std::vector<IssuedRollout> issued(static_cast<std::size_t>(h) + 1);
  ClampCounter clamps;

  TwinState post;
  double thi_hold = cfg.default_thi;
  double thi_prev = thi_hold;
  int hour_prev = 0;
  std::int64_t last_push = std::numeric_limits<std::int64_t>::min() / 2;
  std::int64_t last_refit = 0;

  for (std::size_t t = 0; t < n; ++t) {
    const Timestamp now = frame.time_at(t);
    const std::size_t clamps_before = clamps.events;
    std::uint8_t quality = 0;
    if (thi && thi->has(t)) {
      thi_hold = thi->value(t);
      quality |= kThiObserved;
    }
    const double thi_t = thi_hold;
    const std::optional<double> y = (cbt && cbt->has(t)) ? cbt->at(t) : std::nullopt;
    if (y) quality |= kCbtObserved;
    if (activity[t]) quality |= kActivityObserved;

    TwinState prior;
    std::optional<FeedbackGradient> grad;
    if (t == 0) {
      // Start at the set-point with the stationary open-loop T variance.
      const double f = 1.0 + ode_drhs_dT(p);
      const double q_tt = cfg.noise.Q(0, 0);
      const double p_tt = (1.0 - f * f) > 0.0 ? q_tt / (1.0 - f * f) : q_tt;
      prior.behavior = stationary_distribution(cfg.behavior);
      const double a0 = cfg.behavior.expected_activity(prior.behavior);
      prior.x << p[TwinParams::T_set], ode_rhs(p[TwinParams::T_set], a0, thi_t, p), a0;
      prior.P = Eigen::Vector3d(p_tt, cfg.noise.Q(1, 1), cfg.noise.Q(2, 2)).asDiagonal();
      prior.t = now;
    } else {
      const double t_prev = post.x(0);
      const double a_prev = post.x(2);
      prior = kalman_predict(post, {thi_prev, hour_prev}, p, cfg.behavior, cfg.noise, 1.0, &clamps);
      if (y) {
        grad = feedback_gradient(t_prev, a_prev, thi_prev, p, *y);
        run.one_step_residual[t] = *y - prior.x(0);
      }
    }

    post = kalman_update(prior, {y, activity[t]}, cfg.noise);
    if (activity[t]) post.behavior = behavior_correct(post.behavior, *activity[t], cfg.behavior);

    // Residual of the rollout issued h minutes ago against today's observation.
    if (y && t >= static_cast<std::size_t>(h)) {
      const IssuedRollout& old = issued[(t - static_cast<std::size_t>(h)) % issued.size()];
      const auto ti = static_cast<std::int64_t>(t);
      if (old.valid && ti - last_push >= cfg.gp.push_every) {
        gp.push(old.x, *y - old.t_end);
        last_push = ti;
      }
    }
    if (cfg.gp.refit_every_minutes > 0 && static_cast<std::int64_t>(t) - last_refit >= cfg.gp.refit_every_minutes) {
      gp.refit_grid(cfg.gp);
      last_refit = static_cast<std::int64_t>(t);
    }

    double t_roll = post.x(0);
    const double a_now = post.x(2);
    for (int k = 0; k < h; ++k) t_roll = euler_step(t_roll, a_now, thi_t, p);
    const GpInput x_now = gp_input(thi_t, now.hour_of_day(), a_now, cfg.gp);
    issued[t % issued.size()] = {true, t_roll, x_now};
    if (gp.size() == 0) quality |= kGpEmpty;
    const GpPrediction g = gp.predict(x_now);

    DtFeatureVector& f = run.features[t];
    f.t_cbt_hat = post.x(0);
    f.t_future_hat = std::clamp(t_roll + g.mean, kCoreMin, kCoreMax);
    f.p_stress = stress_sigmoid(f.t_future_hat, cfg.theta_stress, cfg.stress_slope);
    f.p_behavior = post.behavior;
    f.sigma_uncertainty = std::sqrt(std::max(0.0, post.P(0, 0)) + g.std * g.std);
    if (clamps.events != clamps_before) quality |= kClamped;
    f.quality = quality;

    if (grad) p = feedback_update(p, *grad, cfg.feedback_rate);
    thi_prev = thi_t;
    hour_prev = static_cast<int>(now.hour_of_day());
  }
  run.final_params = p;
  run.clamp_events = clamps.events;
  return run;
}

std::vector<Channel> dt_channels(const TwinRun& run) {
  const auto names = channel_names(ModalityId::dt_features);
  const auto units = channel_units(ModalityId::dt_features);
  std::vector<Channel> out;
  for (std::size_t c = 0; c < names.size(); ++c)
    out.push_back({std::string(names[c]), std::string(units[c]), Series(run.features.size())});
  for (std::size_t t = 0; t < run.features.size(); ++t) {
    const DtFeatureVector& f = run.features[t];
    out[0].values.set(t, f.t_cbt_hat);
    out[1].values.set(t, f.t_future_hat);
    out[2].values.set(t, f.p_stress);
    for (std::size_t s = 0; s < kBehaviorCount; ++s) out[3 + s].values.set(t, f.p_behavior[s]);
    out[7].values.set(t, f.sigma_uncertainty);
  }
  return out;
}

AlignedFrame attach_dt_features(const AlignedFrame& frame, const TwinRun& run) {
  if (run.features.size() != frame.length()) throw SchemaError("twin run length does not match frame length");
  return frame.with_modalities({{ModalityId::dt_features, dt_channels(run)}});
}

}  // namespace herdtwin
