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

#include "herdtwin/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/errors.hpp"
#include "herdtwin/metrics.hpp"
#include "herdtwin/parallel.hpp"
#include "herdtwin/rng.hpp"

namespace herdtwin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_opt(std::optional<double> v) { return v ? fmt::format("{:.6f}", *v) : std::string("NA"); }

std::optional<double> youden_threshold(std::span<const double> score, std::span<const int> truth) {
  std::size_t pos = 0;
  for (int t : truth) pos += t ? 1 : 0;
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  double best_j = -1.0, best_t = score[idx.front()];
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = score[idx[i]];
    while (i < idx.size() && score[idx[i]] == s) {
      (truth[idx[i]] ? tp : fp)++;
      ++i;
    }
    const double j = static_cast<double>(tp) / static_cast<double>(pos) - static_cast<double>(fp) / static_cast<double>(neg);
    if (j > best_j) {
      best_j = j;
      best_t = s;
    }
  }
  return best_t;
}

}  // namespace

MetricReport compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                             std::span<const double> lo, std::span<const double> hi,
                             std::span<const int> labels_true, std::span<const int> labels_pred,
                             std::span<const double> probs) {
  MetricReport m;
  m.n = y_true.size();
  m.mae = mae(y_true, y_pred);
  m.rmse = rmse(y_true, y_pred);
  m.r2 = r_squared(y_true, y_pred);
  m.picp = picp(y_true, lo, hi);
  if (!labels_true.empty()) {
    if (probs.size() != labels_true.size()) throw SchemaError("probabilities and labels are not aligned");
    const ConfusionCounts c = confusion(labels_true, labels_pred);
    m.precision = precision(c);
    m.recall = recall(c);
    m.f1 = f1_score(c);
    m.accuracy = accuracy(c);
    m.auc = roc_auc(labels_true, probs);
  }
  return m;
}

std::vector<std::pair<std::string, std::optional<double>>> metric_values(const MetricReport& m) {
  return {{"mae", m.mae},   {"rmse", m.rmse},     {"r2", m.r2},         {"picp", m.picp},         {"f1", m.f1},
          {"precision", m.precision}, {"recall", m.recall}, {"accuracy", m.accuracy}, {"auc", m.auc}};
}

std::vector<MetricSummary> summarize(std::span<const MetricReport> folds) {
  std::vector<MetricSummary> out;
  if (folds.empty()) return out;
  const auto names = metric_values(folds.front());
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<double> v;
    for (const auto& f : folds)
      if (const auto x = metric_values(f)[i].second) v.push_back(*x);
    MetricSummary s;
    s.name = names[i].first;
    s.folds = v.size();
    if (!v.empty()) {
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

const MetricSummary& summary_of(std::span<const MetricSummary> s, std::string_view name) {
  for (const auto& e : s)
    if (e.name == name) return e;
  throw SchemaError(fmt::format("no metric '{}'", name));
}

void audit_disjoint(std::span<const CowId> training, std::span<const CowId> evaluation) {
  for (const auto& c : evaluation)
    if (std::find(training.begin(), training.end(), c) != training.end())
      throw LeakageError(fmt::format("cow '{}' is in both the training and the evaluation set", c.str()));
}

CvResult run_cv(const Dataset& ds, const PipelineConfig& cfg, int k, std::optional<FeatureGroupId> single_group) {
  cfg.validate();
  CvResult res;
  res.spec = group_kfold(ds.cows, k, derive_seed(cfg.ensemble.seed, {0x6f7574}));
  res.row_fold = res.spec.row_folds(ds);
  const std::size_t n = ds.rows();
  res.y_hat.assign(n, kNaN);
  res.lo.assign(n, kNaN);
  res.hi.assign(n, kNaN);
  res.p_stress.assign(n, kNaN);
  res.folds.resize(static_cast<std::size_t>(k));

  parallel_for(static_cast<std::size_t>(k), [&](std::size_t fi) {
    const int fold = static_cast<int>(fi);
    const std::vector<CowId> train_cows = res.spec.training(fold);
    const std::vector<CowId> eval_cows = res.spec.held_out(fold);
    PipelineConfig fc = cfg;
    fc.ensemble.seed = derive_seed(cfg.ensemble.seed, {static_cast<std::uint64_t>(fold) + 1});
    fc.ensemble.k_folds = std::min<int>(cfg.ensemble.k_folds, static_cast<int>(train_cows.size()));
    const Dataset train = ds.select_rows(ds.rows_of(train_cows));
    const Bundle b = train_bundle(train, fc, single_group);
    audit_disjoint(b.training_cows, eval_cows);

    const std::vector<std::size_t> eval_rows = ds.rows_of(eval_cows);
    const Dataset test = ds.select_rows(eval_rows);
    const BundlePrediction p = predict_bundle(b, test.x);
    std::vector<double> yt, yp, lo, hi, probs;
    std::vector<int> lt, lp;
    for (std::size_t i = 0; i < eval_rows.size(); ++i) {
      const std::size_t r = eval_rows[i];
      res.y_hat[r] = p.y_hat[i];
      res.lo[r] = p.lo[i];
      res.hi[r] = p.hi[i];
      res.p_stress[r] = p.p_stress[i];
      if (std::isfinite(test.y[i])) {
        yt.push_back(test.y[i]);
        yp.push_back(p.y_hat[i]);
        lo.push_back(p.lo[i]);
        hi.push_back(p.hi[i]);
      }
      if (test.y_stress[i] >= 0) {
        lt.push_back(test.y_stress[i]);
        lp.push_back(p.label[i]);
        probs.push_back(p.p_stress[i]);
      }
    }
    if (yt.empty()) throw TrainingError(fmt::format("fold {} has no labeled evaluation rows", fold));
    res.folds[fi] = compute_metrics(yt, yp, lo, hi, lt, lp, probs);
  });
  res.summary = summarize(res.folds);

  std::vector<double> score;
  std::vector<int> truth;
  for (std::size_t r = 0; r < n; ++r)
    if (res.row_fold[r] >= 0 && ds.y_stress[r] >= 0 && std::isfinite(res.y_hat[r])) {
      score.push_back(res.y_hat[r]);
      truth.push_back(ds.y_stress[r]);
    }
  if (!score.empty()) res.roc_optimal_theta = youden_threshold(score, truth);
  return res;
}

std::vector<GroupAblationRow> ablate_feature_groups(const Dataset& ds, const PipelineConfig& cfg, int k) {
  std::vector<GroupAblationRow> rows;
  for (FeatureGroupId g : kAllGroups) {
    const FeatureGroup* fg = ds.group(g);
    if (!fg || fg->columns.empty()) {
      spdlog::warn("feature group '{}' absent from the dataset; skipped", to_string(g));
      continue;
    }
    spdlog::info("ablation: group {}", to_string(g));
    rows.push_back({std::string(to_string(g)), run_cv(ds, cfg, k, g)});
  }
  spdlog::info("ablation: all groups");
  rows.push_back({"all_groups", run_cv(ds, cfg, k)});
  return rows;
}

DeltaRow compare_metric(std::string metric, double with_dt, double without_dt, bool lower_is_better) {
  DeltaRow d;
  d.metric = std::move(metric);
  d.with_dt = with_dt;
  d.without_dt = without_dt;
  d.absolute_delta = with_dt - without_dt;
  const double rel = without_dt != 0.0 ? (with_dt - without_dt) / without_dt * 100.0 : 0.0;
  d.relative_pct = lower_is_better ? -rel : rel;
  return d;
}

std::vector<DeltaRow> dt_deltas(const CvResult& with_dt, const CvResult& without_dt) {
  std::vector<DeltaRow> out;
  for (const auto& [name, lower] : std::vector<std::pair<std::string, bool>>{
           {"mae", true}, {"rmse", true}, {"r2", false}, {"picp", false}, {"f1", false}, {"auc", false}}) {
    out.push_back(compare_metric(name, summary_of(with_dt.summary, name).mean,
                                 summary_of(without_dt.summary, name).mean, lower));
  }
  return out;
}

DtAblation ablate_digital_twin(const Dataset& ds, const PipelineConfig& cfg, int k, CvResult with_dt) {
  DtAblation a;
  a.with_dt = std::move(with_dt);
  PipelineConfig nc = cfg;
  std::erase(nc.ensemble.groups, FeatureGroupId::dt_features);
  spdlog::info("ablation: without digital twin");
  a.without_dt = run_cv(drop_group(ds, FeatureGroupId::dt_features), nc, k);
  a.deltas = dt_deltas(a.with_dt, a.without_dt);
  return a;
}

DtAblation ablate_digital_twin(const Dataset& ds, const PipelineConfig& cfg, int k) {
  spdlog::info("ablation: with digital twin");
  return ablate_digital_twin(ds, cfg, k, run_cv(ds, cfg, k));
}

void write_cv_report(std::ostream& out, const CvResult& r) {
  out << "fold,n";
  for (const auto& [name, v] : metric_values(MetricReport{})) out << ',' << name;
  out << '\n';
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    out << f << ',' << r.folds[f].n;
    for (const auto& [name, v] : metric_values(r.folds[f])) out << ',' << fmt_opt(v);
    out << '\n';
  }
  out << "mean,";
  for (const auto& s : r.summary) out << ',' << fmt::format("{:.6f}", s.mean);
  out << "\nstd,";
  for (const auto& s : r.summary) out << ',' << fmt::format("{:.6f}", s.std);
  out << '\n';
}

void write_cv_summary(std::ostream& out, const CvResult& r) {
  out << fmt::format("cow-grouped cross-validation, k = {}\n", r.spec.k);
  for (int f = 0; f < r.spec.k; ++f) {
    std::string cows;
    for (const auto& c : r.spec.held_out(f)) cows += (cows.empty() ? "" : " ") + c.str();
    out << fmt::format("  fold {}: {}\n", f, cows);
  }
  for (const auto& s : r.summary)
    out << fmt::format("  {:<10} {:.4f} +- {:.4f} ({} folds)\n", s.name, s.mean, s.std, s.folds);
  if (r.roc_optimal_theta)
    out << fmt::format("  ROC-optimal threshold on y_hat: {:.3f} C (diagnostic)\n", *r.roc_optimal_theta);
}

void write_group_ablation(std::ostream& out, std::span<const GroupAblationRow> rows) {
  out << "features,r2_mean,r2_std,rmse_mean,rmse_std,mae_mean,mae_std,picp_mean,f1_mean,auc_mean\n";
  for (const auto& row : rows) {
    const auto& s = row.result.summary;
    out << fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", row.name,
                       summary_of(s, "r2").mean, summary_of(s, "r2").std, summary_of(s, "rmse").mean,
                       summary_of(s, "rmse").std, summary_of(s, "mae").mean, summary_of(s, "mae").std,
                       summary_of(s, "picp").mean, summary_of(s, "f1").mean, summary_of(s, "auc").mean);
  }
}

void write_dt_ablation(std::ostream& out, const DtAblation& a) {
  out << "metric,with_dt,without_dt,relative_change_pct,absolute_delta\n";
  for (const auto& d : a.deltas)
    out << fmt::format("{},{:.6f},{:.6f},{:.4f},{:.6f}\n", d.metric, d.with_dt, d.without_dt, d.relative_pct,
                       d.absolute_delta);
}

void write_residuals(std::ostream& out, const Dataset& ds, const CvResult& r) {
  out << "cow_id,t_utc,y,y_hat,lo,hi,p_stress,fold\n";
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (r.row_fold[i] < 0 || !std::isfinite(r.y_hat[i])) continue;
    out << fmt::format("{},{}Z,{},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", ds.cows[ds.cow_of_row[i]].str(),
                       ds.time_of_row[i].iso(), std::isfinite(ds.y[i]) ? fmt::format("{:.6f}", ds.y[i]) : "NA",
                       r.y_hat[i], r.lo[i], r.hi[i], r.p_stress[i], r.row_fold[i]);
  }
}

void write_roc(std::ostream& out, const Dataset& ds, const CvResult& r) {
  std::vector<int> truth;
  std::vector<double> score;
  for (std::size_t i = 0; i < ds.rows(); ++i)
    if (r.row_fold[i] >= 0 && ds.y_stress[i] >= 0 && std::isfinite(r.p_stress[i])) {
      truth.push_back(ds.y_stress[i]);
      score.push_back(r.p_stress[i]);
    }
  out << "fpr,tpr\n";
  if (truth.empty()) return;
  for (const auto& [fpr, tpr] : roc_curve(truth, score)) out << fmt::format("{:.6f},{:.6f}\n", fpr, tpr);
}

}  // namespace herdtwin
