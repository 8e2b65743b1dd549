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

#include "herdtwin/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "herdtwin/binary_io.hpp"
#include "herdtwin/errors.hpp"
#include "herdtwin/synth.hpp"

namespace herdtwin {

namespace {

constexpr std::array<std::string_view, 8> kGroupNames = {"phys_cbt",    "behav_ankle", "behav_immu",  "behav_uwb",
                                                         "env_weather", "prod_milk",   "global_time", "dt_features"};

Series channel_or_absent(const AlignedFrame& frame, ModalityId m, std::string_view name) {
  if (frame.has_modality(m))
    for (const auto& ch : frame.block(m).channels)
      if (ch.name == name) return ch.values;
  return Series(frame.length());
}

Series indicator_series(const AlignedFrame& frame, ModalityId m, bool tso) {
  Series s(frame.length());
  for (std::size_t t = 0; t < frame.length(); ++t) {
    if (!frame.has_modality(m)) {
      s.set(t, tso ? static_cast<double>(t + 1) : 1.0);
      continue;
    }
    const ModalityBlock& b = frame.block(m);
    s.set(t, tso ? static_cast<double>(b.time_since_obs[t]) : static_cast<double>(b.missing[t]));
  }
  return s;
}

Series product(const Series& a, const Series& b) {
  Series out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a.has(t) && b.has(t)) out.set(t, a.value(t) * b.value(t));
  return out;
}

class Builder {
 public:
  explicit Builder(FeatureMatrix& fm) : fm_(fm) {
    for (FeatureGroupId g : kAllGroups) fm_.groups.push_back({g, {}});
  }
  void add(FeatureGroupId g, std::string name, Series s) {
    fm_.groups[static_cast<std::size_t>(g)].columns.push_back(name);
    pending_.push_back({g, std::move(name), std::move(s)});
  }
  void add_all(FeatureGroupId g, std::vector<std::pair<std::string, Series>> cols) {
    for (auto& [n, s] : cols) add(g, std::move(n), std::move(s));
  }
  /// Orders columns group by group so the matrix follows the manifest.
  void finish() {
    for (FeatureGroupId g : kAllGroups)
      for (auto& p : pending_)
        if (p.group == g) {
          fm_.names.push_back(std::move(p.name));
          fm_.columns.push_back(std::move(p.values));
        }
  }

 private:
  struct Pending {
    FeatureGroupId group;
    std::string name;
    Series values;
  };
  FeatureMatrix& fm_;
  std::vector<Pending> pending_;
};

}  // namespace

std::string_view to_string(FeatureGroupId g) { return kGroupNames.at(static_cast<std::size_t>(g)); }

FeatureGroupId group_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i)
    if (kGroupNames[i] == name) return kAllGroups[i];
  throw ConfigError(fmt::format("unknown feature group '{}'", name));
}

std::string_view to_string(RollingStat s) {
  switch (s) {
    case RollingStat::mean: return "mean";
    case RollingStat::std: return "std";
    case RollingStat::max: return "max";
    case RollingStat::min: return "min";
    case RollingStat::var: return "var";
    case RollingStat::skew: return "skew";
  }
  return "?";
}

void FeatureConfig::validate() const {
  if (windows.empty()) throw ConfigError("features.windows must not be empty");
  for (int w : windows)
    if (w < 2) throw ConfigError(fmt::format("rolling window {} is shorter than 2 minutes", w));
  if (horizon_minutes < 1) throw ConfigError("features.horizon_minutes must be >= 1");
  if (!(activity_scale > 0.0)) throw ConfigError("features.activity_scale must be > 0");
  if (zone_grid < 1 || !(barn_x_max > barn_x_min) || !(barn_y_max > barn_y_min))
    throw ConfigError("features barn box or zone grid is invalid");
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw SchemaError(fmt::format("feature matrix has no column '{}'", name));
}

const FeatureGroup& FeatureMatrix::group(FeatureGroupId id) const {
  for (const auto& g : groups)
    if (g.id == id) return g;
  throw SchemaError(fmt::format("feature matrix has no group '{}'", to_string(id)));
}

void FeatureMatrix::check_manifest() const {
  if (names.size() != columns.size()) throw SchemaError("column names and columns differ in count");
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& g : groups)
    for (const auto& c : g.columns) {
      if (!seen.insert(c).second) throw SchemaError(fmt::format("column '{}' appears in two groups", c));
      (void)column_index(c);
      ++total;
    }
  if (total != names.size()) throw SchemaError("some columns belong to no group");
  for (const auto& s : columns)
    if (s.size() != rows) throw SchemaError("column length differs from row count");
  if (label_cbt_future.size() != rows || label_stress.size() != rows) throw SchemaError("label length mismatch");
}

std::vector<std::pair<std::string, Series>> rolling_stats(const Series& x, std::string_view prefix,
                                                          const std::vector<int>& windows,
                                                          const std::vector<RollingStat>& stats) {
  const std::size_t n = x.size();
  std::vector<std::pair<std::string, Series>> out;
  std::vector<double> buf;
  for (int wi : windows) {
    const auto w = static_cast<std::size_t>(wi);
    std::vector<Series> cols(stats.size(), Series(n));
    std::deque<std::size_t> qmax, qmin;
    for (std::size_t t = 0; t < n; ++t) {
      if (x.has(t)) {
        while (!qmax.empty() && x.value(qmax.back()) <= x.value(t)) qmax.pop_back();
        qmax.push_back(t);
        while (!qmin.empty() && x.value(qmin.back()) >= x.value(t)) qmin.pop_back();
        qmin.push_back(t);
      }
      const std::size_t lo = t + 1 >= w ? t + 1 - w : 0;
      while (!qmax.empty() && qmax.front() < lo) qmax.pop_front();
      while (!qmin.empty() && qmin.front() < lo) qmin.pop_front();
      if (qmax.empty()) continue;
      const double mx = x.value(qmax.front());
      const double mn = x.value(qmin.front());
      buf.clear();
      for (std::size_t i = lo; i <= t; ++i)
        if (x.has(i)) buf.push_back(x.value(i));
      const double cnt = static_cast<double>(buf.size());
      double sum = 0.0;
      for (double v : buf) sum += v;
      const double mean = sum / cnt;
      double m2 = 0.0, m3 = 0.0;
      const bool constant = mx == mn;
      if (!constant)
        for (double v : buf) {
          const double d = v - mean;
          m2 += d * d;
          m3 += d * d * d;
        }
      for (std::size_t k = 0; k < stats.size(); ++k) {
        Series& c = cols[k];
        switch (stats[k]) {
          case RollingStat::mean: c.set(t, constant ? mx : mean); break;
          case RollingStat::max: c.set(t, mx); break;
          case RollingStat::min: c.set(t, mn); break;
          case RollingStat::var:
            if (buf.size() >= 2) c.set(t, m2 / (cnt - 1.0));
            break;
          case RollingStat::std:
            if (buf.size() >= 2) c.set(t, std::sqrt(m2 / (cnt - 1.0)));
            break;
          case RollingStat::skew:
            if (buf.size() >= 3 && !constant && m2 > 0.0) {
              const double g1 = (m3 / cnt) / std::pow(m2 / cnt, 1.5);
              c.set(t, g1 * std::sqrt(cnt * (cnt - 1.0)) / (cnt - 2.0));
            }
            break;
        }
      }
    }
    for (std::size_t k = 0; k < stats.size(); ++k)
      out.emplace_back(fmt::format("{}_{}_{}", prefix, wi, to_string(stats[k])), std::move(cols[k]));
  }
  return out;
}

std::vector<std::pair<std::string, Series>> temporal_encoding(Timestamp start, std::size_t n) {
  Series s(n), c(n), d(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Timestamp ts = start + static_cast<std::int64_t>(t);
    const double angle = 2.0 * std::numbers::pi * ts.hour_of_day() / 24.0;
    s.set(t, std::sin(angle));
    c.set(t, std::cos(angle));
    d.set(t, static_cast<double>(ts.day_of_week()));
  }
  return {{"sin_hour", std::move(s)}, {"cos_hour", std::move(c)}, {"day_of_week", std::move(d)}};
}

std::vector<std::pair<std::string, Series>> physiological_derivatives(const Series& cbt, const Series& thi) {
  const std::size_t n = cbt.size();
  Series d(n), delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0 && cbt.has(t) && cbt.has(t - 1)) d.set(t, cbt.value(t) - cbt.value(t - 1));
    if (cbt.has(t) && thi.has(t)) delta.set(t, cbt.value(t) - thi.value(t));
  }
  return {{"dcbt_dt", std::move(d)}, {"delta_thi", std::move(delta)}};
}

Series cumulative_stress(const Series& cbt, double tau) {
  Series out(cbt.size());
  double count = 0.0;
  for (std::size_t t = 0; t < cbt.size(); ++t) {
    if (cbt.has(t) && cbt.value(t) > tau) count += 1.0;
    out.set(t, count);
  }
  return out;
}

std::optional<double> uwb_zone(double x, double y, const FeatureConfig& cfg) {
  if (x < cfg.barn_x_min || x > cfg.barn_x_max || y < cfg.barn_y_min || y > cfg.barn_y_max) return std::nullopt;
  const int g = cfg.zone_grid;
  const int ix = std::min(g - 1, static_cast<int>((x - cfg.barn_x_min) / (cfg.barn_x_max - cfg.barn_x_min) * g));
  const int iy = std::min(g - 1, static_cast<int>((y - cfg.barn_y_min) / (cfg.barn_y_max - cfg.barn_y_min) * g));
  return static_cast<double>(iy * g + ix);
}

std::vector<std::pair<std::string, Series>> cross_modal_features(const AlignedFrame& frame, const FeatureConfig& cfg) {
  const std::size_t n = frame.length();
  const Series cbt = channel_or_absent(frame, ModalityId::cbt, "cbt");
  const Series thi = channel_or_absent(frame, ModalityId::thi, "thi");
  const Series ax = channel_or_absent(frame, ModalityId::immu, "acc_x");
  const Series ay = channel_or_absent(frame, ModalityId::immu, "acc_y");
  const Series ux = channel_or_absent(frame, ModalityId::uwb, "x");
  const Series uy = channel_or_absent(frame, ModalityId::uwb, "y");
  const Series air = channel_or_absent(frame, ModalityId::weather, "air_temp");
  const Series rh = channel_or_absent(frame, ModalityId::weather, "rel_humidity");

  Series activity(n), speed(n), zone(n), thi_out(n), thi_diff(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (ax.has(t) && ay.has(t)) activity.set(t, std::hypot(ax.value(t), ay.value(t)) / cfg.activity_scale);
    if (t > 0 && ux.has(t) && uy.has(t) && ux.has(t - 1) && uy.has(t - 1))
      speed.set(t, std::hypot(ux.value(t) - ux.value(t - 1), uy.value(t) - uy.value(t - 1)));
    if (ux.has(t) && uy.has(t)) zone.set(t, uwb_zone(ux.value(t), uy.value(t), cfg));
    if (air.has(t) && rh.has(t)) thi_out.set(t, thi_from_weather(air.value(t), rh.value(t)));
    if (thi.has(t) && thi_out.has(t)) thi_diff.set(t, thi.value(t) - thi_out.value(t));
  }
  const auto deriv = physiological_derivatives(cbt, thi);
  std::vector<std::pair<std::string, Series>> out;
  out.emplace_back("activity", activity);
  out.emplace_back("uwb_speed", speed);
  out.emplace_back("uwb_zone", zone);
  out.emplace_back("thi_outdoor", thi_out);
  out.emplace_back("thi_indoor_minus_outdoor", thi_diff);
  out.emplace_back("cbt_times_activity", product(cbt, activity));
  out.emplace_back("speed_times_zone", product(speed, zone));
  out.emplace_back("activity_times_delta_thi", product(activity, deriv[1].second));
  return out;
}

FeatureMatrix assemble(const AlignedFrame& frame, const FeatureConfig& cfg) {
  cfg.validate();
  if (frame.step_minutes() != 1)
    throw ResolutionError(fmt::format("feature assembly requires a 1-minute frame, got step {}", frame.step_minutes()));
  using G = FeatureGroupId;
  using M = ModalityId;
  const std::size_t n = frame.length();
  const std::vector<RollingStat> full(kAllStats.begin(), kAllStats.end());
  const std::vector<RollingStat> mean_only{RollingStat::mean};

  FeatureMatrix fm;
  fm.cow = frame.cow();
  fm.start = frame.start();
  fm.rows = n;
  Builder b(fm);

  auto cross = cross_modal_features(frame, cfg);
  auto take = [&](std::string_view name) -> Series {
    for (auto& [k, v] : cross)
      if (k == name) return v;
    throw std::logic_error("missing cross feature");
  };
  auto indicators = [&](G g, M m) {
    b.add(g, fmt::format("{}_missing", to_string(m)), indicator_series(frame, m, false));
    b.add(g, fmt::format("{}_tso", to_string(m)), indicator_series(frame, m, true));
  };
  auto channel_block = [&](G g, M m, const std::string& prefix, const std::vector<RollingStat>& stats) {
    for (auto name : channel_names(m)) {
      const Series s = channel_or_absent(frame, m, name);
      const std::string col = fmt::format("{}_{}", prefix, name);
      b.add(g, col, s);
      b.add_all(g, rolling_stats(s, col, cfg.windows, stats));
    }
  };

  // Physiology.
  const Series cbt = channel_or_absent(frame, M::cbt, "cbt");
  const Series thi = channel_or_absent(frame, M::thi, "thi");
  b.add(G::phys_cbt, "cbt", cbt);
  b.add_all(G::phys_cbt, physiological_derivatives(cbt, thi));
  b.add(G::phys_cbt, "cum_stress", cumulative_stress(cbt, cfg.tau));
  b.add_all(G::phys_cbt, rolling_stats(cbt, "cbt", cfg.windows, full));
  b.add(G::phys_cbt, "cbt_times_activity", take("cbt_times_activity"));
  b.add(G::phys_cbt, "activity_times_delta_thi", take("activity_times_delta_thi"));
  indicators(G::phys_cbt, M::cbt);

  // Behavior.
  channel_block(G::behav_ankle, M::ankle, "ankle", full);
  indicators(G::behav_ankle, M::ankle);

  const Series activity = take("activity");
  b.add(G::behav_immu, "activity", activity);
  b.add_all(G::behav_immu, rolling_stats(activity, "activity", cfg.windows, full));
  channel_block(G::behav_immu, M::immu, "immu", mean_only);
  indicators(G::behav_immu, M::immu);

  channel_block(G::behav_uwb, M::uwb, "uwb", mean_only);
  const Series speed = take("uwb_speed");
  b.add(G::behav_uwb, "uwb_speed", speed);
  b.add_all(G::behav_uwb, rolling_stats(speed, "uwb_speed", cfg.windows, full));
  b.add(G::behav_uwb, "uwb_zone", take("uwb_zone"));
  b.add(G::behav_uwb, "speed_times_zone", take("speed_times_zone"));
  channel_block(G::behav_uwb, M::pressure, "baro", mean_only);
  indicators(G::behav_uwb, M::uwb);
  indicators(G::behav_uwb, M::pressure);

  // Environment.
  b.add(G::env_weather, "thi", thi);
  b.add_all(G::env_weather, rolling_stats(thi, "thi", cfg.windows, full));
  channel_block(G::env_weather, M::weather, "weather", mean_only);
  b.add(G::env_weather, "thi_outdoor", take("thi_outdoor"));
  b.add(G::env_weather, "thi_indoor_minus_outdoor", take("thi_indoor_minus_outdoor"));
  indicators(G::env_weather, M::thi);
  indicators(G::env_weather, M::weather);

  // Production.
  channel_block(G::prod_milk, M::milk, "milk", mean_only);
  indicators(G::prod_milk, M::milk);

  b.add_all(G::global_time, temporal_encoding(frame.start(), n));

  for (auto name : channel_names(M::dt_features))
    b.add(G::dt_features, std::string(name), channel_or_absent(frame, M::dt_features, name));

  b.finish();

  const auto h = static_cast<std::size_t>(cfg.horizon_minutes);
  fm.label_cbt_future.assign(n, std::nullopt);
  for (std::size_t t = 0; t + h < n; ++t) fm.label_cbt_future[t] = cbt.at(t + h);
  fm.label_stress = label_stress_windows(cbt, cfg.theta_stress, cfg.horizon_minutes);
  return fm;
}

std::vector<FeatureGroup> feature_manifest(const FeatureConfig& cfg) {
  const AlignedFrame probe = AlignedFrame::build(CowId("manifest"), Timestamp{0}, 1, {});
  return assemble(probe, cfg).groups;
}

void write_features(std::ostream& out, const FeatureMatrix& fm) {
  fm.check_manifest();
  out << kFeatureMagic << '\n';
  BinaryWriter w(out);
  w.str(fm.cow ? fm.cow->str() : std::string());
  w.i64(fm.start.epoch_minutes);
  w.u64(fm.rows);
  w.u64(fm.groups.size());
  for (const auto& g : fm.groups) {
    w.u8(static_cast<std::uint8_t>(g.id));
    w.u64(g.columns.size());
    for (const auto& c : g.columns) w.str(c);
  }
  w.u64(fm.names.size());
  for (std::size_t i = 0; i < fm.names.size(); ++i) {
    w.str(fm.names[i]);
    w.raw(fm.columns[i].presence().data(), fm.rows);
    w.raw(fm.columns[i].raw_values().data(), fm.rows * sizeof(double));
  }
  for (std::size_t r = 0; r < fm.rows; ++r) {
    w.u8(fm.label_cbt_future[r] ? 1 : 0);
    w.f64(fm.label_cbt_future[r].value_or(0.0));
    w.u8(fm.label_stress[r] ? (*fm.label_stress[r] ? 1 : 0) : 2);
  }
}

FeatureMatrix read_features(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic)) throw FormatError("empty feature container");
  if (magic != kFeatureMagic) throw VersionError(std::string(kFeatureMagic), magic);
  BinaryReader r(in);
  FeatureMatrix fm;
  const std::string cow = r.str();
  if (!cow.empty()) fm.cow = CowId(cow);
  fm.start = Timestamp{r.i64()};
  fm.rows = r.u64();
  const auto n_groups = r.u64();
  if (n_groups > kAllGroups.size()) throw FormatError("corrupt group count");
  for (std::uint64_t i = 0; i < n_groups; ++i) {
    const auto id = r.u8();
    if (id >= kAllGroups.size()) throw FormatError("corrupt group id");
    FeatureGroup g{static_cast<FeatureGroupId>(id), {}};
    const auto nc = r.u64();
    for (std::uint64_t c = 0; c < nc; ++c) g.columns.push_back(r.str());
    fm.groups.push_back(std::move(g));
  }
  const auto n_cols = r.u64();
  for (std::uint64_t i = 0; i < n_cols; ++i) {
    fm.names.push_back(r.str());
    std::vector<std::uint8_t> mask(fm.rows);
    std::vector<double> values(fm.rows);
    r.raw(mask.data(), fm.rows);
    r.raw(values.data(), fm.rows * sizeof(double));
    Series s(fm.rows);
    for (std::size_t t = 0; t < fm.rows; ++t)
      if (mask[t]) s.set(t, values[t]);
    fm.columns.push_back(std::move(s));
  }
  fm.label_cbt_future.resize(fm.rows);
  fm.label_stress.resize(fm.rows);
  for (std::size_t t = 0; t < fm.rows; ++t) {
    const bool has = r.u8() != 0;
    const double v = r.f64();
    if (has) fm.label_cbt_future[t] = v;
    const auto s = r.u8();
    if (s < 2) fm.label_stress[t] = s == 1;
  }
  fm.check_manifest();
  return fm;
}

void write_features_file(const std::filesystem::path& path, const FeatureMatrix& fm) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  write_features(out, fm);
}

FeatureMatrix read_features_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_features(in);
}

void write_features_csv(std::ostream& out, const FeatureMatrix& fm) {
  std::string line = "t_utc";
  for (const auto& n : fm.names) line += "," + n;
  line += ",label_cbt_future,label_stress\n";
  out << line;
  for (std::size_t r = 0; r < fm.rows; ++r) {
    line = fm.time_at(r).iso();
    for (const auto& c : fm.columns) {
      line += ',';
      if (c.has(r)) line += fmt::format("{}", c.value(r));
    }
    line += ',';
    if (fm.label_cbt_future[r]) line += fmt::format("{}", *fm.label_cbt_future[r]);
    line += ',';
    if (fm.label_stress[r]) line += *fm.label_stress[r] ? "1" : "0";
    line += '\n';
    out << line;
  }
}

}  // namespace herdtwin
