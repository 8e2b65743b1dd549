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

// Slow, obviously-correct reference implementations used by the tests.

#include <herdtwin/gp.hpp>
#include <herdtwin/timeseries.hpp>
#include <herdtwin/twin_model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace herdtwin::oracle {

/// Classical RK4 on ode_rhs with inputs held constant within each minute.
/// Returns the state at minutes 0..n (n = inputs.size()).
inline std::vector<double> rk4_rollout(double t0, std::span<const double> activity, std::span<const double> thi,
                                       const TwinParams& p, int substeps = 4) {
  std::vector<double> out{t0};
  double t = t0;
  const double h = 1.0 / substeps;
  for (std::size_t m = 0; m < activity.size(); ++m) {
    auto f = [&](double x) { return ode_rhs(x, activity[m], thi[m], p); };
    for (int s = 0; s < substeps; ++s) {
      const double k1 = f(t);
      const double k2 = f(t + 0.5 * h * k1);
      const double k3 = f(t + 0.5 * h * k2);
      const double k4 = f(t + h * k3);
      t += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back(t);
  }
  return out;
}

/// GP posterior by a dense solve of (K + sigma_n2 I).
inline GpPrediction dense_gp(std::span<const GpInput> xs, std::span<const double> rs, const GpInput& x,
                             double sigma_c2, double length_scale, double sigma_n2) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  if (n == 0) return {0.0, std::sqrt(sigma_c2 + sigma_n2)};
  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd r(n), k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i) = rs[static_cast<std::size_t>(i)];
    k(i) = rbf_kernel(xs[static_cast<std::size_t>(i)], x, sigma_c2, length_scale);
    for (Eigen::Index j = 0; j < n; ++j)
      K(i, j) = rbf_kernel(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)], sigma_c2, length_scale);
  }
  K.diagonal().array() += sigma_n2;
  const Eigen::VectorXd a = K.fullPivLu().solve(r);
  const Eigen::VectorXd b = K.fullPivLu().solve(k);
  const double var = sigma_c2 + sigma_n2 - k.dot(b);
  return {k.dot(a), std::sqrt(std::max(var, 0.0))};
}

struct ExhaustiveSplit {
  int feature = -1;
  double gain = 0.0;
  /// Row membership of the left child.
  std::vector<bool> left;
};

/// Best squared-error split of residuals g over every threshold between
/// distinct present values and both directions for absent (NaN) values.
inline ExhaustiveSplit exhaustive_split(const std::vector<std::vector<double>>& cols, std::span<const double> g,
                                        std::size_t min_leaf) {
  ExhaustiveSplit best;
  const std::size_t n = g.size();
  double G = 0.0;
  for (double v : g) G += v;
  const double parent = G * G / static_cast<double>(n);
  for (std::size_t f = 0; f < cols.size(); ++f) {
    std::vector<double> vals;
    for (double v : cols[f])
      if (!std::isnan(v)) vals.push_back(v);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::vector<double> cuts(vals.begin(), vals.end());
    for (int miss_left = 0; miss_left < 2; ++miss_left) {
      for (double cut : cuts) {
        std::vector<bool> left(n);
        double gl = 0.0;
        std::size_t nl = 0;
        for (std::size_t r = 0; r < n; ++r) {
          const double v = cols[f][r];
          left[r] = std::isnan(v) ? miss_left == 1 : v <= cut;
          if (left[r]) {
            gl += g[r];
            ++nl;
          }
        }
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double gr = G - gl;
        const double gain = gl * gl / static_cast<double>(nl) + gr * gr / static_cast<double>(nr) - parent;
        if (gain > best.gain) best = {static_cast<int>(f), gain, std::move(left)};
      }
    }
  }
  return best;
}

struct NaiveStats {
  std::optional<double> mean, std, max, min, var, skew;
};

/// Two-pass statistics of the present values in [t - w + 1, t].
inline NaiveStats naive_window(const Series& x, std::size_t t, std::size_t w) {
  std::vector<double> v;
  for (std::size_t i = t + 1 >= w ? t + 1 - w : 0; i <= t; ++i)
    if (x.has(i)) v.push_back(x.value(i));
  NaiveStats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double a : v) sum += a;
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0;
  for (double a : v) {
    m2 += (a - mean) * (a - mean);
    m3 += (a - mean) * (a - mean) * (a - mean);
  }
  s.mean = mean;
  s.max = *std::max_element(v.begin(), v.end());
  s.min = *std::min_element(v.begin(), v.end());
  if (v.size() >= 2) {
    s.var = m2 / (n - 1.0);
    s.std = std::sqrt(*s.var);
  }
  if (v.size() >= 3 && m2 > 0.0 && *s.max != *s.min) {
    const double g1 = (m3 / n) / std::pow(m2 / n, 1.5);
    s.skew = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
  }
  return s;
}

/// Mean per bin of the 1-second linear fill. Samples are (utc second, value),
/// sorted; a gap g with 0 < g < max_gap inside a bin is filled at every second.
inline std::map<std::int64_t, double> naive_resample_mean(std::span<const std::pair<std::int64_t, double>> samples,
                                                         std::int64_t bin_seconds, std::int64_t max_gap) {
  auto bin_of = [&](std::int64_t s) {
    return s >= 0 ? s / bin_seconds : -((-s + bin_seconds - 1) / bin_seconds);
  };
  std::map<std::int64_t, std::vector<double>> filled;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto [ta, va] = samples[i];
    filled[bin_of(ta)].push_back(va);
    if (i + 1 == samples.size()) continue;
    const auto [tb, vb] = samples[i + 1];
    if (bin_of(tb) != bin_of(ta)) continue;
    const std::int64_t gap = tb - ta;
    if (gap <= 0 || gap >= max_gap) continue;
    for (std::int64_t j = 1; j < gap; ++j)
      filled[bin_of(ta)].push_back(va + (vb - va) * static_cast<double>(j) / static_cast<double>(gap));
  }
  std::map<std::int64_t, double> out;
  for (const auto& [b, v] : filled) {
    double s = 0.0;
    for (double a : v) s += a;
    out[b] = s / static_cast<double>(v.size());
  }
  return out;
}

/// Probability that a random positive outscores a random negative; ties count half.
inline std::optional<double> mann_whitney_auc(std::span<const int> truth, std::span<const double> score) {
  double pos = 0.0, neg = 0.0, wins = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1)
      pos += 1.0;
    else
      neg += 1.0;
  }
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != 1) continue;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth[j] == 1) continue;
      if (score[i] > score[j])
        wins += 1.0;
      else if (score[i] == score[j])
        wins += 0.5;
    }
  }
  return wins / (pos * neg);
}

/// max of the present values in (t, t + h] compared with theta.
inline std::vector<std::optional<bool>> naive_stress_labels(const Series& cbt, double theta, std::size_t h) {
  std::vector<std::optional<bool>> out(cbt.size());
  for (std::size_t t = 0; t + h < cbt.size(); ++t) {
    std::optional<double> mx;
    for (std::size_t i = t + 1; i <= t + h; ++i)
      if (cbt.has(i)) mx = mx ? std::max(*mx, cbt.value(i)) : cbt.value(i);
    if (mx) out[t] = *mx > theta;
  }
  return out;
}

/// Central finite difference of f at x along coordinate j.
template <class F, class V>
double central_difference(F&& f, V x, std::size_t j, double h) {
  V a = x, b = x;
  a[j] += h;
  b[j] -= h;
  return (f(a) - f(b)) / (2.0 * h);
}

}  // namespace herdtwin::oracle
