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

#include "herdtwin/twin_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "herdtwin/errors.hpp"

namespace herdtwin {

namespace {

constexpr std::array<std::string_view, TwinParams::kCount> kParamNames = {
    "alpha_activity", "beta_tolerance", "C_thermal", "k_d", "T_set", "k_th", "M_basal", "gamma", "teff_c0", "teff_c1",
};

}  // namespace

TwinParams TwinParams::defaults() {
  TwinParams p;
  // Fixed point 38.6 degC at THI 68 and rest, about 39.3 degC at THI 84.
  p.value = {1.0, 1.0, 2275.0, 22.5, 38.6, 1.5, 15.0, 6.0, -19.0, 0.7};
  p.lo = {0.25, 0.25, 1000.0, 5.0, 37.5, 0.2, 0.0, 0.0, -40.0, 0.2};
  p.hi = {4.0, 4.0, 4000.0, 60.0, 39.5, 10.0, 60.0, 40.0, 0.0, 1.5};
  return p;
}

std::string_view TwinParams::name(std::size_t i) { return kParamNames.at(i); }

void TwinParams::clamp_to_bounds() {
  for (std::size_t i = 0; i < kCount; ++i) value[i] = std::clamp(value[i], lo[i], hi[i]);
}

void TwinParams::validate() const {
  for (std::size_t i = 0; i < kCount; ++i) {
    if (!(lo[i] <= hi[i])) throw ConfigError(fmt::format("twin parameter {} has empty bounds", name(i)));
    if (!(value[i] >= lo[i] && value[i] <= hi[i]))
      throw ConfigError(fmt::format("twin parameter {} = {} outside [{}, {}]", name(i), value[i], lo[i], hi[i]));
  }
  if (!(value[C] > 0.0) || !(lo[C] > 0.0)) throw ConfigError("C_thermal must be strictly positive");
}

double ode_numerator(double t_core, double activity, double thi, const TwinParams& p) {
  using P = TwinParams;
  const double q_met = (p[P::M_basal] + p[P::gamma] * activity) * p[P::alpha];
  const double q_env = p[P::k_th] * (p[P::teff_c0] + p[P::teff_c1] * thi - t_core);
  const double q_diss = p[P::k_d] * (t_core - p[P::T_set]) * p[P::beta];
  return q_met + q_env - q_diss;
}

double ode_rhs(double t_core, double activity, double thi, const TwinParams& p) {
  return ode_numerator(t_core, activity, thi, p) / p[TwinParams::C];
}

double ode_drhs_dT(const TwinParams& p) {
  using P = TwinParams;
  return -(p[P::k_th] + p[P::k_d] * p[P::beta]) / p[P::C];
}

std::array<double, TwinParams::kCount> ode_param_gradient(double t_core, double activity, double thi,
                                                          const TwinParams& p) {
  using P = TwinParams;
  const double c = p[P::C];
  std::array<double, P::kCount> g{};
  g[P::alpha] = (p[P::M_basal] + p[P::gamma] * activity) / c;
  g[P::M_basal] = p[P::alpha] / c;
  g[P::gamma] = p[P::alpha] * activity / c;
  g[P::k_th] = (p[P::teff_c0] + p[P::teff_c1] * thi - t_core) / c;
  g[P::teff_c0] = p[P::k_th] / c;
  g[P::teff_c1] = p[P::k_th] * thi / c;
  g[P::beta] = -p[P::k_d] * (t_core - p[P::T_set]) / c;
  g[P::k_d] = -p[P::beta] * (t_core - p[P::T_set]) / c;
  g[P::T_set] = p[P::beta] * p[P::k_d] / c;
  g[P::C] = -ode_numerator(t_core, activity, thi, p) / (c * c);
  return g;
}

double euler_step(double t_core, double activity, double thi, const TwinParams& p, double dt_minutes,
                  ClampCounter* clamps) {
  const double next = t_core + dt_minutes * ode_rhs(t_core, activity, thi, p);
  if (next < kCoreMin || next > kCoreMax) {
    if (clamps) ++clamps->events;
    return std::clamp(next, kCoreMin, kCoreMax);
  }
  return next;
}

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::lying: return "lying";
    case Behavior::standing: return "standing";
    case Behavior::walking: return "walking";
    case Behavior::feeding: return "feeding";
  }
  return "?";
}

BehaviorModel BehaviorModel::defaults() {
  BehaviorModel bm;
  bm.M << 0.985, 0.012, 0.001, 0.002,  //
      0.020, 0.950, 0.010, 0.020,      //
      0.010, 0.050, 0.900, 0.040,      //
      0.005, 0.030, 0.015, 0.950;
  for (auto& row : bm.phi_hour) row.fill(1.0);
  return bm;
}

BehaviorDist BehaviorModel::psi_env(double thi) const {
  BehaviorDist psi{1.0, 1.0, 1.0, 1.0};
  if (thi > psi_threshold) psi[static_cast<std::size_t>(Behavior::standing)] += psi_slope * (thi - psi_threshold);
  return psi;
}

Eigen::Matrix4d BehaviorModel::modulated(int hour, double thi) const {
  const auto& phi = phi_hour[static_cast<std::size_t>(((hour % 24) + 24) % 24)];
  const BehaviorDist psi = psi_env(thi);
  Eigen::Matrix4d out = M;
  for (int r = 0; r < 4; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) {
      out(r, c) *= phi[static_cast<std::size_t>(c)] * psi[static_cast<std::size_t>(c)];
      sum += out(r, c);
    }
    if (!(sum > 0.0)) throw ModelError(fmt::format("behavior transition row {} has zero mass after modulation", r));
    out.row(r) /= sum;
  }
  return out;
}

double BehaviorModel::expected_activity(const BehaviorDist& dist) const {
  double a = 0.0;
  for (std::size_t s = 0; s < kBehaviorCount; ++s) a += dist[s] * activity_mean[s];
  return a;
}

void BehaviorModel::validate() const {
  for (int r = 0; r < 4; ++r) {
    if ((M.row(r).array() < 0.0).any()) throw ConfigError(fmt::format("behavior matrix row {} has negative entries", r));
    if (std::abs(M.row(r).sum() - 1.0) > 1e-9) throw ConfigError(fmt::format("behavior matrix row {} does not sum to 1", r));
  }
  for (const auto& row : phi_hour)
    for (double v : row)
      if (!(v > 0.0)) throw ConfigError("phi_hour multipliers must be positive");
  if (psi_slope < 0.0) throw ConfigError("psi_slope must be >= 0");
  if (!(activity_std > 0.0)) throw ConfigError("activity_std must be > 0");
}

BehaviorDist markov_step(const BehaviorDist& dist, int hour, double thi, const BehaviorModel& bm) {
  const Eigen::Matrix4d mt = bm.modulated(hour, thi);
  BehaviorDist out{};
  for (std::size_t c = 0; c < kBehaviorCount; ++c)
    for (std::size_t r = 0; r < kBehaviorCount; ++r)
      out[c] += dist[r] * mt(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  double sum = 0.0;
  for (double v : out) sum += v;
  for (double& v : out) v /= sum;
  return out;
}

BehaviorDist stationary_distribution(const BehaviorModel& bm) {
  Eigen::RowVector4d v = Eigen::RowVector4d::Constant(0.25);
  for (int it = 0; it < 20000; ++it) {
    const Eigen::RowVector4d next = v * bm.M;
    if ((next - v).cwiseAbs().maxCoeff() < 1e-15) {
      v = next;
      break;
    }
    v = next;
  }
  v /= v.sum();
  return {v(0), v(1), v(2), v(3)};
}

void write_params(std::ostream& out, const TwinParams& p) {
  out << kParamsMagic << '\n';
  for (std::size_t i = 0; i < TwinParams::kCount; ++i)
    out << fmt::format("{} {:.17g} {:.17g} {:.17g}\n", TwinParams::name(i), p.value[i], p.lo[i], p.hi[i]);
}

TwinParams read_params(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty parameter file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kParamsMagic) throw VersionError(std::string(kParamsMagic), line);
  TwinParams p;
  std::array<bool, TwinParams::kCount> seen{};
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string key;
    double v = 0, lo = 0, hi = 0;
    if (!(ls >> key >> v >> lo >> hi)) throw FormatError(fmt::format("bad parameter line '{}'", line));
    const auto it = std::find(kParamNames.begin(), kParamNames.end(), key);
    if (it == kParamNames.end()) throw FormatError(fmt::format("unknown twin parameter '{}'", key));
    const auto i = static_cast<std::size_t>(it - kParamNames.begin());
    p.value[i] = v;
    p.lo[i] = lo;
    p.hi[i] = hi;
    seen[i] = true;
  }
  for (std::size_t i = 0; i < TwinParams::kCount; ++i)
    if (!seen[i]) throw FormatError(fmt::format("parameter file lacks '{}'", TwinParams::name(i)));
  p.validate();
  return p;
}

void write_params_file(const std::filesystem::path& path, const TwinParams& p) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  write_params(out, p);
}

TwinParams read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_params(in);
}

}  // namespace herdtwin
