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

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace herdtwin {

double mae(std::span<const double> y, std::span<const double> p);
double rmse(std::span<const double> y, std::span<const double> p);
/// Coefficient of determination; nullopt when y has zero variance.
std::optional<double> r_squared(std::span<const double> y, std::span<const double> p);
/// Fraction of y inside [lo, hi].
double picp(std::span<const double> y, std::span<const double> lo, std::span<const double> hi);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};
ConfusionCounts confusion(std::span<const int> truth, std::span<const int> pred);
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(const ConfusionCounts& c);
double accuracy(const ConfusionCounts& c);
/// Area under the ROC curve: trapezoid over unique score thresholds, which
/// equals the Mann-Whitney statistic with midranks for ties. nullopt when
/// only one class is present.
std::optional<double> roc_auc(std::span<const int> truth, std::span<const double> score);
/// ROC points (fpr, tpr) from the highest threshold down, starting at (0, 0).
std::vector<std::pair<double, double>> roc_curve(std::span<const int> truth, std::span<const double> score);

}  // namespace herdtwin
