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

#include "herdtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "herdtwin/errors.hpp"

namespace herdtwin {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw SchemaError(fmt::format("length mismatch: {} vs {}", a, b));
  if (a == 0) throw SchemaError("empty input");
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> p) {
  check_aligned(y.size(), p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - p[i]);
  return s / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> p) {
  check_aligned(y.size(), p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - p[i]) * (y[i] - p[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

std::optional<double> r_squared(std::span<const double> y, std::span<const double> p) {
  check_aligned(y.size(), p.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - p[i]) * (y[i] - p[i]);
  }
  if (ss_tot <= 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

double picp(std::span<const double> y, std::span<const double> lo, std::span<const double> hi) {
  check_aligned(y.size(), lo.size());
  check_aligned(y.size(), hi.size());
  std::size_t in = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (lo[i] <= y[i] && y[i] <= hi[i]) ++in;
  return static_cast<double>(in) / static_cast<double>(y.size());
}

ConfusionCounts confusion(std::span<const int> truth, std::span<const int> pred) {
  check_aligned(truth.size(), pred.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) (pred[i] ? c.tp : c.fn)++;
    else (pred[i] ? c.fp : c.tn)++;
  }
  return c;
}

double precision(const ConfusionCounts& c) {
  return c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
}

double recall(const ConfusionCounts& c) {
  return c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
}

double f1_score(const ConfusionCounts& c) {
  const double p = precision(c), r = recall(c);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

double accuracy(const ConfusionCounts& c) {
  const std::size_t n = c.tp + c.fp + c.tn + c.fn;
  return n ? static_cast<double>(c.tp + c.tn) / static_cast<double>(n) : 0.0;
}

std::vector<std::pair<double, double>> roc_curve(std::span<const int> truth, std::span<const double> score) {
  check_aligned(truth.size(), score.size());
  std::vector<std::size_t> idx(truth.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::size_t pos = 0;
  for (int t : truth) pos += t ? 1 : 0;
  const std::size_t neg = truth.size() - pos;
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = score[idx[i]];
    while (i < idx.size() && score[idx[i]] == s) {
      (truth[idx[i]] ? tp : fp)++;
      ++i;
    }
    pts.emplace_back(neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0,
                     pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0);
  }
  return pts;
}

std::optional<double> roc_auc(std::span<const int> truth, std::span<const double> score) {
  const auto pts = roc_curve(truth, score);
  const bool both = std::any_of(truth.begin(), truth.end(), [](int t) { return t != 0; }) &&
                    std::any_of(truth.begin(), truth.end(), [](int t) { return t == 0; });
  if (!both) return std::nullopt;
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) * 0.5;
  return area;
}

}  // namespace herdtwin
