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

#include "herdtwin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/errors.hpp"
#include "herdtwin/frame_io.hpp"
#include "herdtwin/parallel.hpp"
#include "herdtwin/rng.hpp"

namespace herdtwin {

namespace {

// Sub-stream tags for derive_seed.
enum Stream : std::uint64_t { kParams = 1, kBehavior, kNoise, kDropout, kUwbWalk, kHeat = 10, kThiNoise, kStation, kWeather };

constexpr double kBarnX = 40.0;
constexpr double kBarnY = 30.0;
constexpr double kFeedBunkY = 28.0;

double noise_of(const SynthConfig& cfg, ModalityId m) {
  auto it = cfg.noise.find(m);
  return it == cfg.noise.end() ? 0.0 : it->second;
}

DropoutSpec dropout_of(const SynthConfig& cfg, ModalityId m) {
  auto it = cfg.dropout.find(m);
  return it == cfg.dropout.end() ? DropoutSpec{} : it->second;
}

/// On/off Markov dropout with stationary missing fraction `rate` and mean episode length `mean_gap`.
class DropoutProcess {
 public:
  DropoutProcess(const DropoutSpec& spec, Rng rng) : rng_(std::move(rng)) {
    if (spec.rate <= 0.0) return;
    if (spec.rate >= 1.0) {
      always_ = true;
      return;
    }
    p_end_ = 1.0 / std::max(1.0, spec.mean_gap);
    p_start_ = std::min(1.0, spec.rate * p_end_ / (1.0 - spec.rate));
    off_ = uniform01(rng_) < spec.rate;
    active_ = true;
  }

  /// True when the sample at this step is dropped.
  bool next() {
    if (always_) return true;
    if (!active_) return false;
    const bool dropped = off_;
    const double u = uniform01(rng_);
    off_ = off_ ? !(u < p_end_) : (u < p_start_);
    return dropped;
  }

 private:
  Rng rng_;
  bool active_ = false;
  bool always_ = false;
  bool off_ = false;
  double p_start_ = 0.0;
  double p_end_ = 1.0;
};

std::string local_iso(Timestamp t, std::int64_t second, int tz) {
  return format_iso_seconds(t.epoch_minutes * 60 + second + std::int64_t{tz} * 60);
}

std::vector<double> simulate_thi(const SynthConfig& cfg, std::size_t minutes) {
  const ThiProfile& tp = cfg.thi;
  // The heat-wave schedule uses its own stream and never reads the amplitude,
  // so raising the amplitude raises THI pointwise.
  Rng heat = make_rng(cfg.seed, {kHeat});
  struct Wave {
    double start, length;
  };
  std::vector<Wave> waves;
  for (int d = 0; d < cfg.days; ++d) {
    const double u = uniform01(heat);
    const double hour = 24.0 * uniform01(heat);
    const double len_h = tp.heat_wave_min_hours + (tp.heat_wave_max_hours - tp.heat_wave_min_hours) * uniform01(heat);
    if (u < tp.heat_wave_prob) waves.push_back({(d * 24.0 + hour) * 60.0, len_h * 60.0});
  }
  Rng ar = make_rng(cfg.seed, {kWeather, 1});
  std::vector<double> thi(minutes);
  double drift = 0.0;
  for (std::size_t t = 0; t < minutes; ++t) {
    const Timestamp now = cfg.start + static_cast<std::int64_t>(t);
    const double h = now.hour_of_day();
    double v = tp.base + tp.amplitude * std::cos(2.0 * std::numbers::pi * (h - tp.peak_hour) / 24.0);
    for (const Wave& w : waves) {
      const double u = (static_cast<double>(t) - w.start) / w.length;
      if (u > 0.0 && u < 1.0) v += tp.heat_wave_amplitude * std::pow(std::sin(std::numbers::pi * u), 2);
    }
    drift = 0.995 * drift + 0.05 * standard_normal(ar);
    thi[t] = v + drift;
  }
  return thi;
}

TwinParams sample_params(const SynthConfig& cfg, int cow) {
  using P = TwinParams;
  Rng rng = make_rng(cfg.seed, {kParams, static_cast<std::uint64_t>(cow)});
  TwinParams p = cfg.base_params;
  for (std::size_t j : {P::alpha, P::beta, P::k_d, P::k_th, P::M_basal, P::gamma})
    p.value[j] *= 1.0 + cfg.param_spread * standard_normal(rng);
  p.value[P::T_set] += cfg.t_set_spread * standard_normal(rng);
  p.clamp_to_bounds();
  return p;
}

struct CowOutput {
  SynthCow cow;
  std::map<ModalityId, std::vector<RawRecord>> raw;
};

CowOutput simulate_cow(const SynthConfig& cfg, int index, const std::vector<double>& thi) {
  const std::size_t n = thi.size();
  const auto ci = static_cast<std::uint64_t>(index);
  CowOutput out{SynthCow{CowId(fmt::format("cow{:02d}", index + 1)), sample_params(cfg, index), {}, {}, {}}, {}};
  SynthCow& cow = out.cow;
  const TwinParams& p = cow.true_params;
  const BehaviorModel& bm = cfg.behavior;

  // Behavior path.
  Rng brng = make_rng(cfg.seed, {kBehavior, ci});
  cow.behavior.resize(n);
  auto sample = [&](const auto& probs) {
    const double u = uniform01(brng);
    double acc = 0.0;
    for (std::size_t s = 0; s < kBehaviorCount; ++s) {
      acc += probs[s];
      if (u < acc) return static_cast<Behavior>(s);
    }
    return Behavior::feeding;
  };
  cow.behavior[0] = sample(stationary_distribution(bm));
  for (std::size_t t = 1; t < n; ++t) {
    const Timestamp prev = cfg.start + static_cast<std::int64_t>(t - 1);
    const Eigen::Matrix4d mt = bm.modulated(static_cast<int>(prev.hour_of_day()), thi[t - 1]);
    const auto r = static_cast<Eigen::Index>(cow.behavior[t - 1]);
    const std::array<double, 4> row{mt(r, 0), mt(r, 1), mt(r, 2), mt(r, 3)};
    cow.behavior[t] = sample(row);
  }
  cow.latent_activity.resize(n);
  for (std::size_t t = 0; t < n; ++t) cow.latent_activity[t] = bm.activity_mean[static_cast<std::size_t>(cow.behavior[t])];

  // Latent CBT: start at the fixed point of the first minute's inputs, then Euler.
  cow.latent_cbt.resize(n);
  {
    using P = TwinParams;
    const double a0 = cow.latent_activity[0];
    const double num = p[P::alpha] * (p[P::M_basal] + p[P::gamma] * a0) + p[P::k_th] * (p[P::teff_c0] + p[P::teff_c1] * thi[0]) +
                       p[P::k_d] * p[P::beta] * p[P::T_set];
    cow.latent_cbt[0] = std::clamp(num / (p[P::k_th] + p[P::k_d] * p[P::beta]), kCoreMin, kCoreMax);
  }
  for (std::size_t t = 1; t < n; ++t)
    cow.latent_cbt[t] = euler_step(cow.latent_cbt[t - 1], cow.latent_activity[t - 1], thi[t - 1], p);

  const int tz = cfg.tz_offset_minutes;
  auto noise_rng = [&](ModalityId m) { return make_rng(cfg.seed, {kNoise, ci, static_cast<std::uint64_t>(m)}); };
  auto drop = [&](ModalityId m) {
    return DropoutProcess(dropout_of(cfg, m), make_rng(cfg.seed, {kDropout, ci, static_cast<std::uint64_t>(m)}));
  };
  auto record = [&](ModalityId m, Timestamp t, std::int64_t second, std::vector<double> values) {
    out.raw[m].push_back({cow.id, m, local_iso(t, second, tz), tz, std::move(values)});
  };

  // CBT.
  {
    Rng rng = noise_rng(ModalityId::cbt);
    DropoutProcess dp = drop(ModalityId::cbt);
    const double s = noise_of(cfg, ModalityId::cbt);
    for (std::size_t t = 0; t < n; ++t) {
      const double v = cow.latent_cbt[t] + s * standard_normal(rng);
      if (!dp.next()) record(ModalityId::cbt, cfg.start + static_cast<std::int64_t>(t), 0, {v});
    }
  }
  // IMMU: several samples per minute sharing one heading angle.
  {
    Rng rng = noise_rng(ModalityId::immu);
    DropoutProcess dp = drop(ModalityId::immu);
    const double s = noise_of(cfg, ModalityId::immu);
    for (std::size_t t = 0; t < n; ++t) {
      const double a = cow.latent_activity[t];
      const double phi = 2.0 * std::numbers::pi * uniform01(rng);
      const bool dropped = dp.next();
      for (int sec = 0; sec < 60; sec += cfg.immu_period_seconds) {
        std::vector<double> v{cfg.activity_scale * a * std::cos(phi) + s * standard_normal(rng),
                              cfg.activity_scale * a * std::sin(phi) + s * standard_normal(rng),
                              9.81 + s * standard_normal(rng),
                              0.4 * a + s * standard_normal(rng),
                              s * standard_normal(rng),
                              0.2 * a * std::sin(phi) + s * standard_normal(rng)};
        if (!dropped) record(ModalityId::immu, cfg.start + static_cast<std::int64_t>(t), sec, std::move(v));
      }
    }
  }
  // UWB position, barometric pressure of the tag, ankle posture.
  {
    Rng walk = make_rng(cfg.seed, {kUwbWalk, ci});
    Rng rng_u = noise_rng(ModalityId::uwb);
    Rng rng_p = noise_rng(ModalityId::pressure);
    Rng rng_a = noise_rng(ModalityId::ankle);
    DropoutProcess dp_u = drop(ModalityId::uwb);
    DropoutProcess dp_p = drop(ModalityId::pressure);
    DropoutProcess dp_a = drop(ModalityId::ankle);
    const double su = noise_of(cfg, ModalityId::uwb);
    const double sp = noise_of(cfg, ModalityId::pressure);
    const double flip = noise_of(cfg, ModalityId::ankle);
    double x = 2.0 + (kBarnX - 4.0) * uniform01(walk);
    double y = 2.0 + (kBarnY - 4.0) * uniform01(walk);
    auto reflect = [](double v, double hi) {
      if (v < 0.5) v = 1.0 - v;
      if (v > hi - 0.5) v = 2.0 * (hi - 0.5) - v;
      return std::clamp(v, 0.5, hi - 0.5);
    };
    for (std::size_t t = 0; t < n; ++t) {
      const Behavior b = cow.behavior[t];
      const double step = b == Behavior::walking ? 6.0 : b == Behavior::standing ? 0.5 : b == Behavior::feeding ? 0.3 : 0.0;
      x = reflect(x + step * standard_normal(walk), kBarnX);
      y = reflect(y + step * standard_normal(walk), kBarnY);
      if (b == Behavior::feeding) y += 0.3 * (kFeedBunkY - y);
      const double z = b == Behavior::lying ? 0.7 : 1.5;
      const Timestamp now = cfg.start + static_cast<std::int64_t>(t);
      std::vector<double> pos{x + su * standard_normal(rng_u), y + su * standard_normal(rng_u), z + su * standard_normal(rng_u)};
      const double pres = 1013.25 - 0.12 * z + sp * standard_normal(rng_p);
      double code = b == Behavior::lying ? 0.0 : 1.0;
      if (uniform01(rng_a) < flip) code = 1.0 - code;
      if (!dp_u.next()) record(ModalityId::uwb, now, 0, std::move(pos));
      if (!dp_p.next()) record(ModalityId::pressure, now, 0, {pres});
      if (!dp_a.next()) record(ModalityId::ankle, now, 0, {code});
    }
  }
  // Milk: one record per UTC day at midnight, depressed by the previous day's heat load.
  {
    Rng rng = noise_rng(ModalityId::milk);
    DropoutProcess dp = drop(ModalityId::milk);
    const double s = noise_of(cfg, ModalityId::milk);
    Rng level_rng = make_rng(cfg.seed, {kParams, ci, 99});
    const double level = 30.0 + 3.0 * standard_normal(level_rng);
    for (int d = 0; d < cfg.days; ++d) {
      double load = 0.0;
      if (d > 0) {
        for (std::size_t t = static_cast<std::size_t>(d - 1) * 1440; t < static_cast<std::size_t>(d) * 1440; ++t)
          load += thi[t];
        load /= 1440.0;
      } else {
        load = cfg.thi.base;
      }
      const double v = level - 0.25 * std::max(0.0, load - 68.0) + s * standard_normal(rng);
      if (!dp.next()) record(ModalityId::milk, cfg.start + static_cast<std::int64_t>(d) * 1440, 0, {v});
    }
  }
  return out;
}

}  // namespace

BehaviorModel SynthConfig::default_behavior() {
  BehaviorModel bm = BehaviorModel::defaults();
  using B = Behavior;
  for (int h = 0; h < 24; ++h) {
    auto& row = bm.phi_hour[static_cast<std::size_t>(h)];
    if (h >= 22 || h < 4) row[static_cast<std::size_t>(B::lying)] = 1.5;
    if ((h >= 5 && h < 7) || (h >= 15 && h < 17)) {
      row[static_cast<std::size_t>(B::feeding)] = 2.5;
      row[static_cast<std::size_t>(B::walking)] = 1.5;
    }
  }
  return bm;
}

std::map<ModalityId, double> SynthConfig::default_noise() {
  return {{ModalityId::cbt, 0.1},  {ModalityId::immu, 0.15}, {ModalityId::uwb, 0.1},
          {ModalityId::pressure, 0.05}, {ModalityId::ankle, 0.01}, {ModalityId::thi, 0.3},
          {ModalityId::weather, 0.2}, {ModalityId::milk, 0.5}};
}

std::map<ModalityId, DropoutSpec> SynthConfig::default_dropout() {
  return {{ModalityId::cbt, {0.02, 30}},      {ModalityId::immu, {0.03, 20}},  {ModalityId::uwb, {0.05, 15}},
          {ModalityId::pressure, {0.02, 10}}, {ModalityId::ankle, {0.02, 30}}, {ModalityId::thi, {0.01, 10}},
          {ModalityId::weather, {0.01, 10}},  {ModalityId::milk, {0.0, 1}}};
}

void SynthConfig::make_noiseless() {
  for (auto& [m, s] : noise) s = 0.0;
  for (auto& [m, d] : dropout) d.rate = 0.0;
}

void SynthConfig::validate() const {
  if (n_cows < 1) throw ConfigError(fmt::format("synth.n_cows must be >= 1 (got {})", n_cows));
  if (days < 1) throw ConfigError(fmt::format("synth.days must be >= 1 (got {})", days));
  if (start.epoch_minutes % 1440 != 0) throw ConfigError("synth.start must be a UTC midnight");
  for (const auto& [m, s] : noise)
    if (!(s >= 0.0)) throw ConfigError(fmt::format("synth noise for {} must be >= 0", to_string(m)));
  for (const auto& [m, d] : dropout) {
    if (!(d.rate >= 0.0 && d.rate <= 1.0)) throw ConfigError(fmt::format("synth dropout rate for {} must be in [0,1]", to_string(m)));
    if (!(d.mean_gap >= 1.0)) throw ConfigError(fmt::format("synth dropout gap for {} must be >= 1", to_string(m)));
  }
  if (param_spread < 0.0 || t_set_spread < 0.0) throw ConfigError("synth parameter spreads must be >= 0");
  if (immu_period_seconds < 1 || immu_period_seconds > 60) throw ConfigError("synth.immu_period_seconds must be in [1,60]");
  if (thi.heat_wave_amplitude < 0.0 || thi.heat_wave_prob < 0.0 || thi.heat_wave_prob > 1.0)
    throw ConfigError("synth heat-wave settings out of range");
  if (!(thi.heat_wave_min_hours > 0.0) || thi.heat_wave_max_hours < thi.heat_wave_min_hours)
    throw ConfigError("synth heat-wave duration range is invalid");
  base_params.validate();
  behavior.validate();
}

double thi_from_weather(double air_temp, double rel_humidity) {
  return (1.8 * air_temp + 32.0) - (0.55 - 0.0055 * rel_humidity) * (1.8 * air_temp - 26.0);
}

SynthHerd simulate_herd(const SynthConfig& cfg) {
  cfg.validate();
  SynthHerd herd;
  herd.config = cfg;
  herd.start = cfg.start;
  herd.minutes = static_cast<std::size_t>(cfg.days) * 1440;
  herd.latent_thi = simulate_thi(cfg, herd.minutes);

  std::vector<std::optional<CowOutput>> outs(static_cast<std::size_t>(cfg.n_cows));
  parallel_for(outs.size(), [&](std::size_t i) { outs[i] = simulate_cow(cfg, static_cast<int>(i), herd.latent_thi); });
  for (auto& slot : outs) {
    CowOutput& o = *slot;
    for (auto& [m, recs] : o.raw) {
      auto& dst = herd.raw[m];
      std::move(recs.begin(), recs.end(), std::back_inserter(dst));
    }
    herd.cows.push_back(std::move(o.cow));
  }

  // Station modalities: indoor THI and outdoor weather consistent with it.
  const int tz = cfg.tz_offset_minutes;
  Rng thi_noise = make_rng(cfg.seed, {kThiNoise, static_cast<std::uint64_t>(ModalityId::thi)});
  Rng wx_noise = make_rng(cfg.seed, {kThiNoise, static_cast<std::uint64_t>(ModalityId::weather)});
  Rng wx = make_rng(cfg.seed, {kWeather, 2});
  DropoutProcess dp_thi(dropout_of(cfg, ModalityId::thi), make_rng(cfg.seed, {kStation, 1}));
  DropoutProcess dp_wx(dropout_of(cfg, ModalityId::weather), make_rng(cfg.seed, {kStation, 2}));
  const double s_thi = noise_of(cfg, ModalityId::thi);
  const double s_wx = noise_of(cfg, ModalityId::weather);
  auto& thi_recs = herd.raw[ModalityId::thi];
  auto& wx_recs = herd.raw[ModalityId::weather];
  for (std::size_t t = 0; t < herd.minutes; ++t) {
    const Timestamp now = cfg.start + static_cast<std::int64_t>(t);
    const double h = now.hour_of_day();
    const double phase = std::cos(2.0 * std::numbers::pi * (h - cfg.thi.peak_hour) / 24.0);
    const double rh = 60.0 - 15.0 * phase;
    // Outdoor THI sits 1.5 below the barn; invert the THI formula for air temperature.
    const double thi_out = herd.latent_thi[t] - 1.5;
    const double k = 0.55 - 0.0055 * rh;
    const double air = (thi_out - 32.0 - 26.0 * k) / (1.8 * (1.0 - k));
    const double wind = 2.0 + 1.5 * uniform01(wx);
    const double solar = (h > 6.0 && h < 18.0) ? 900.0 * std::sin(std::numbers::pi * (h - 6.0) / 12.0) : 0.0;
    const double rain = uniform01(wx) < 0.01 ? 0.5 : 0.0;
    const double v_thi = herd.latent_thi[t] + s_thi * standard_normal(thi_noise);
    std::vector<double> w{air + s_wx * standard_normal(wx_noise), rh + s_wx * standard_normal(wx_noise),
                          std::max(0.0, wind + s_wx * standard_normal(wx_noise)),
                          std::max(0.0, solar + s_wx * standard_normal(wx_noise)), rain};
    if (!dp_thi.next()) thi_recs.push_back({std::nullopt, ModalityId::thi, local_iso(now, 0, tz), tz, {v_thi}});
    if (!dp_wx.next()) wx_recs.push_back({std::nullopt, ModalityId::weather, local_iso(now, 0, tz), tz, std::move(w)});
  }
  return herd;
}

AlignedFrame SynthHerd::truth_frame(std::size_t cow) const {
  const SynthCow& c = cows.at(cow);
  Series cbt(minutes), thi(minutes);
  for (std::size_t t = 0; t < minutes; ++t) {
    cbt.set(t, c.latent_cbt[t]);
    thi.set(t, latent_thi[t]);
  }
  std::map<ModalityId, std::vector<Channel>> chs;
  chs[ModalityId::cbt] = {{"cbt", "degC", std::move(cbt)}};
  chs[ModalityId::thi] = {{"thi", "index", std::move(thi)}};
  return AlignedFrame::build(c.id, start, minutes, std::move(chs));
}

void write_herd(const SynthHerd& herd, const std::filesystem::path& dir) {
  const auto raw = dir / "raw";
  const auto truth = dir / "truth";
  std::filesystem::create_directories(raw);
  std::filesystem::create_directories(truth);
  for (const auto& [m, recs] : herd.raw)
    write_sensor_file(raw / fmt::format("{}.csv", to_string(m)), m, is_station_modality(m), recs);
  for (std::size_t i = 0; i < herd.cows.size(); ++i) {
    write_frame_file(truth / fmt::format("{}.frame", herd.cows[i].id.str()), herd.truth_frame(i));
    write_params_file(truth / fmt::format("{}.params", herd.cows[i].id.str()), herd.cows[i].true_params);
  }
  spdlog::info("simulate: wrote {} cows x {} minutes to {}", herd.cows.size(), herd.minutes, dir.string());
}

std::vector<AlignedFrame> herd_frames(const SynthHerd& herd, const IngestConfig& cfg) {
  std::vector<RawRecord> all;
  for (const auto& [m, recs] : herd.raw) all.insert(all.end(), recs.begin(), recs.end());
  return ingest_records(all, cfg);
}

std::vector<std::optional<bool>> label_stress_windows(const Series& cbt, double theta, int horizon) {
  if (horizon <= 0) throw ConfigError(fmt::format("stress label horizon must be > 0 (got {})", horizon));
  const std::size_t n = cbt.size();
  const auto h = static_cast<std::size_t>(horizon);
  std::vector<std::optional<bool>> out(n);
  std::deque<std::size_t> window;  // indices with present values, values decreasing
  std::size_t next = 1;
  for (std::size_t t = 0; t + h < n; ++t) {
    for (; next <= t + h; ++next) {
      if (!cbt.has(next)) continue;
      while (!window.empty() && cbt.value(window.back()) <= cbt.value(next)) window.pop_back();
      window.push_back(next);
    }
    while (!window.empty() && window.front() <= t) window.pop_front();
    if (!window.empty()) out[t] = cbt.value(window.front()) > theta;
  }
  return out;
}

}  // namespace herdtwin
