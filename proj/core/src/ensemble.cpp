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

#include "herdtwin/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/binary_io.hpp"
#include "herdtwin/errors.hpp"
#include "herdtwin/metrics.hpp"
#include "herdtwin/parallel.hpp"
#include "herdtwin/rng.hpp"

namespace herdtwin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// R² over rows where both label and prediction are finite.
std::optional<double> finite_r2(std::span<const double> y, std::span<const double> p,
                                std::span<const std::size_t> rows) {
  std::vector<double> a, b;
  for (std::size_t r : rows)
    if (std::isfinite(y[r]) && std::isfinite(p[r])) {
      a.push_back(y[r]);
      b.push_back(p[r]);
    }
  if (a.size() < 2) return std::nullopt;
  return r_squared(a, b);
}

std::vector<double> masked_labels(std::span<const double> y, std::span<const int> row_fold, int held_out) {
  std::vector<double> out(y.begin(), y.end());
  for (std::size_t r = 0; r < out.size(); ++r)
    if (row_fold[r] < 0 || row_fold[r] == held_out) out[r] = kNaN;
  return out;
}

void predict_rows(const GbdtModel& m, const DataMatrix& x, std::span<const int> row_fold, int fold,
                  std::vector<double>& out) {
  std::vector<double> row(x.n_cols());
  for (std::size_t r = 0; r < x.rows; ++r) {
    if (row_fold[r] != fold) continue;
    for (std::size_t c = 0; c < x.n_cols(); ++c) row[c] = x.cols[c][r];
    out[r] = m.predict_row(row);
  }
}

bool any_present(const DataMatrix& x) {
  for (const auto& col : x.cols)
    for (double v : col)
      if (!std::isnan(v)) return true;
  return false;
}

}  // namespace

const FeatureGroup* Dataset::group(FeatureGroupId id) const {
  for (const auto& g : groups)
    if (g.id == id) return &g;
  return nullptr;
}

std::vector<std::size_t> Dataset::rows_of(std::span<const CowId> wanted) const {
  std::vector<char> keep(cows.size(), 0);
  for (std::size_t i = 0; i < cows.size(); ++i)
    keep[i] = std::find(wanted.begin(), wanted.end(), cows[i]) != wanted.end();
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < rows(); ++r)
    if (keep[cow_of_row[r]]) out.push_back(r);
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> idx) const {
  Dataset out;
  out.groups = groups;
  out.x = x.select_rows(idx);
  // Keep only cows that own a selected row, in their original order.
  std::vector<char> used(cows.size(), 0);
  for (std::size_t r : idx) used[cow_of_row[r]] = 1;
  std::vector<std::size_t> remap(cows.size(), 0);
  for (std::size_t c = 0; c < cows.size(); ++c)
    if (used[c]) {
      remap[c] = out.cows.size();
      out.cows.push_back(cows[c]);
    }
  for (std::size_t r : idx) {
    out.cow_of_row.push_back(remap[cow_of_row[r]]);
    out.time_of_row.push_back(time_of_row[r]);
    out.y.push_back(y[r]);
    out.y_stress.push_back(y_stress[r]);
  }
  return out;
}

Dataset make_dataset(std::span<const FeatureMatrix> fms, std::size_t row_stride, bool labeled_only) {
  if (row_stride == 0) throw ConfigError("row stride must be >= 1");
  Dataset ds;
  if (fms.empty()) return ds;
  ds.x.names = fms.front().names;
  ds.groups = fms.front().groups;
  ds.x.cols.resize(ds.x.names.size());
  for (const FeatureMatrix& fm : fms) {
    if (!fm.cow) throw SchemaError("feature matrix without a cow id");
    if (fm.names != ds.x.names)
      throw SchemaError(fmt::format("feature columns of cow '{}' differ from cow '{}'", fm.cow->str(),
                                    fms.front().cow->str()));
    if (std::find(ds.cows.begin(), ds.cows.end(), *fm.cow) != ds.cows.end())
      throw SchemaError(fmt::format("cow '{}' appears twice", fm.cow->str()));
    const std::size_t ci = ds.cows.size();
    ds.cows.push_back(*fm.cow);
    for (std::size_t r = 0; r < fm.rows; r += row_stride) {
      const auto& lab = fm.label_cbt_future[r];
      if (labeled_only && !lab) continue;
      ds.cow_of_row.push_back(ci);
      ds.time_of_row.push_back(fm.time_at(r));
      ds.y.push_back(lab ? *lab : kNaN);
      const auto& st = fm.label_stress[r];
      ds.y_stress.push_back(st ? static_cast<int>(*st) : -1);
      for (std::size_t c = 0; c < fm.columns.size(); ++c) {
        const Series& s = fm.columns[c];
        ds.x.cols[c].push_back(s.has(r) ? s.value(r) : kNaN);
      }
    }
  }
  ds.x.rows = ds.cow_of_row.size();
  return ds;
}

int FoldSpec::fold_of(const CowId& cow) const {
  const auto it = std::lower_bound(cows.begin(), cows.end(), cow);
  if (it == cows.end() || *it != cow) return -1;
  return fold_of_cow[static_cast<std::size_t>(it - cows.begin())];
}

std::vector<CowId> FoldSpec::held_out(int fold) const {
  std::vector<CowId> out;
  for (std::size_t i = 0; i < cows.size(); ++i)
    if (fold_of_cow[i] == fold) out.push_back(cows[i]);
  return out;
}

std::vector<CowId> FoldSpec::training(int fold) const {
  std::vector<CowId> out;
  for (std::size_t i = 0; i < cows.size(); ++i)
    if (fold_of_cow[i] != fold) out.push_back(cows[i]);
  return out;
}

std::vector<int> FoldSpec::row_folds(const Dataset& ds) const {
  std::vector<int> per_cow(ds.cows.size());
  for (std::size_t i = 0; i < ds.cows.size(); ++i) per_cow[i] = fold_of(ds.cows[i]);
  std::vector<int> out(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) out[r] = per_cow[ds.cow_of_row[r]];
  return out;
}

FoldSpec group_kfold(std::vector<CowId> cows, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be >= 2");
  std::sort(cows.begin(), cows.end());
  cows.erase(std::unique(cows.begin(), cows.end()), cows.end());
  if (cows.size() < static_cast<std::size_t>(k))
    throw ConfigError(fmt::format("{} distinct cows cannot fill {} folds", cows.size(), k));
  std::vector<std::size_t> order(cows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {0x6b66});
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[j]);
  }
  FoldSpec spec;
  spec.k = k;
  spec.seed = seed;
  spec.cows = cows;
  spec.fold_of_cow.assign(cows.size(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    spec.fold_of_cow[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return spec;
}

ExpertWeights expert_weights(const std::map<FeatureGroupId, double>& val_r2) {
  ExpertWeights out;
  double total = 0.0;
  for (const auto& [g, r2] : val_r2) total += std::max(0.0, r2);
  for (const auto& [g, r2] : val_r2)
    out.weights[g] = total > 0.0 ? std::max(0.0, r2) / total : 1.0 / static_cast<double>(val_r2.size());
  out.uniform_fallback = total <= 0.0 && !val_r2.empty();
  if (out.uniform_fallback) spdlog::warn("no expert has positive validation R²; using uniform weights");
  return out;
}

DataMatrix group_columns(const DataMatrix& x, const FeatureGroup& g) {
  DataMatrix out;
  out.rows = x.rows;
  for (const auto& name : g.columns) {
    out.names.push_back(name);
    out.cols.push_back(x.cols[x.index_of(name)]);
  }
  return out;
}

ExpertSet train_experts(const Dataset& ds, const FoldSpec& spec, std::span<const FeatureGroupId> groups,
                        const GbdtConfig& cfg) {
  if (spec.k < 2) throw ConfigError("expert training needs >= 2 folds");
  const std::vector<int> row_fold = spec.row_folds(ds);
  ExpertSet es;
  std::vector<FeatureGroupId> active;
  std::vector<DataMatrix> gx;
  for (FeatureGroupId g : kAllGroups) {
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) continue;
    es.groups.push_back(g);
    const FeatureGroup* fg = ds.group(g);
    DataMatrix m = fg ? group_columns(ds.x, *fg) : DataMatrix{};
    if (!fg || fg->columns.empty() || !any_present(m)) {
      spdlog::warn("feature group '{}' has no present columns; excluded from the ensemble", to_string(g));
      continue;
    }
    active.push_back(g);
    gx.push_back(std::move(m));
  }

  const auto k = static_cast<std::size_t>(spec.k);
  const std::size_t n_tasks = active.size() * (k + 1);
  std::vector<GbdtModel> models(n_tasks);
  parallel_for(n_tasks, [&](std::size_t t) {
    const std::size_t gi = t / (k + 1);
    const int fold = static_cast<int>(t % (k + 1));
    GbdtConfig c = cfg;
    c.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(active[gi]), static_cast<std::uint64_t>(fold)});
    const std::vector<double> y = masked_labels(ds.y, row_fold, fold);
    models[t] = gbdt_fit(gx[gi], y, c);
  });

  std::vector<std::size_t> all_rows(ds.rows());
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::map<FeatureGroupId, double> r2;
  for (std::size_t gi = 0; gi < active.size(); ++gi) {
    const FeatureGroupId g = active[gi];
    std::vector<double> oof(ds.rows(), kNaN);
    for (std::size_t f = 0; f < k; ++f) predict_rows(models[gi * (k + 1) + f], gx[gi], row_fold, static_cast<int>(f), oof);
    const auto v = finite_r2(ds.y, oof, all_rows);
    r2[g] = v.value_or(0.0);
    es.val_r2[g] = r2[g];
    es.oof_pred[g] = std::move(oof);
    es.experts.emplace(g, std::move(models[gi * (k + 1) + k]));
  }
  const ExpertWeights w = expert_weights(r2);
  es.uniform_fallback = w.uniform_fallback;
  for (FeatureGroupId g : es.groups) {
    const auto it = w.weights.find(g);
    es.weights[g] = it == w.weights.end() ? 0.0 : it->second;
  }
  return es;
}

std::string_view to_string(GlobalFeatures g) { return g == GlobalFeatures::time ? "time" : "time_env_milk"; }

GlobalFeatures global_features_from_string(std::string_view s) {
  if (s == "time") return GlobalFeatures::time;
  if (s == "time_env_milk") return GlobalFeatures::time_env_milk;
  throw ConfigError(fmt::format("unknown global feature set '{}'", s));
}

std::vector<std::string> global_columns(std::span<const FeatureGroup> groups, GlobalFeatures mode) {
  std::vector<std::string> out;
  auto take = [&](FeatureGroupId id, auto&& pred) {
    for (const auto& g : groups)
      if (g.id == id)
        for (const auto& c : g.columns)
          if (pred(c)) out.push_back(c);
  };
  take(FeatureGroupId::global_time, [](const std::string&) { return true; });
  if (mode == GlobalFeatures::time_env_milk) {
    take(FeatureGroupId::env_weather, [](const std::string& c) { return c.ends_with("_mean"); });
    take(FeatureGroupId::prod_milk, [](const std::string&) { return true; });
  }
  return out;
}

std::string meta_column(FeatureGroupId g) { return fmt::format("w_{}", to_string(g)); }

DataMatrix build_meta_matrix(const ExpertSet& es, const DataMatrix& x, std::span<const std::string> global_cols,
                             bool use_oof) {
  DataMatrix out;
  out.rows = x.rows;
  for (FeatureGroupId g : es.groups) {
    out.names.push_back(meta_column(g));
    std::vector<double> col(x.rows, 0.0);
    const double w = es.weights.at(g);
    const auto it = es.experts.find(g);
    if (w > 0.0 && it != es.experts.end()) {
      std::vector<double> pred;
      if (use_oof) {
        pred = es.oof_pred.at(g);
        if (pred.size() != x.rows)
          throw SchemaError(fmt::format("OOF predictions of '{}' have {} rows, matrix has {}", to_string(g),
                                        pred.size(), x.rows));
      } else {
        DataMatrix gx;
        gx.rows = x.rows;
        for (const auto& name : it->second.manifest()) {
          const auto pos = std::find(x.names.begin(), x.names.end(), name);
          if (pos == x.names.end())
            throw SchemaError(fmt::format("feature group '{}' is missing column '{}'", to_string(g), name));
          gx.names.push_back(name);
          gx.cols.push_back(x.cols[static_cast<std::size_t>(pos - x.names.begin())]);
        }
        pred = it->second.predict(gx);
      }
      for (std::size_t r = 0; r < x.rows; ++r) col[r] = w * pred[r];
    }
    out.cols.push_back(std::move(col));
  }
  for (const auto& name : global_cols) {
    out.names.push_back(name);
    out.cols.push_back(x.cols[x.index_of(name)]);
  }
  return out;
}

void TunerConfig::validate() const {
  if (n_trials < 1) throw ConfigError("tuner budget must be >= 1");
}

GbdtConfig sample_trial_config(std::uint64_t seed, int trial) {
  Rng rng = make_rng(seed, {0x74756e65, static_cast<std::uint64_t>(trial)});
  auto uniform_int = [&](int lo, int hi) {
    return lo + static_cast<int>(uniform01(rng) * static_cast<double>(hi - lo + 1));
  };
  GbdtConfig c;
  c.n_trees = uniform_int(100, 800);
  c.learning_rate = std::exp(std::log(0.02) + uniform01(rng) * (std::log(0.2) - std::log(0.02)));
  c.max_leaves = uniform_int(7, 63);
  c.min_samples_leaf = uniform_int(5, 50);
  c.feature_fraction = 0.6 + 0.4 * uniform01(rng);
  c.bagging_fraction = 0.6 + 0.4 * uniform01(rng);
  c.seed = derive_seed(seed, {0x6d657461, static_cast<std::uint64_t>(trial)});
  return c;
}

std::vector<double> cross_fold_predict(const DataMatrix& x, std::span<const double> y, std::span<const int> row_fold,
                                       int k, const GbdtConfig& cfg) {
  std::vector<double> out(x.rows, kNaN);
  for (int f = 0; f < k; ++f) {
    GbdtConfig c = cfg;
    c.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(f)});
    const GbdtModel m = gbdt_fit(x, masked_labels(y, row_fold, f), c);
    predict_rows(m, x, row_fold, f, out);
  }
  return out;
}

TunedMeta tune_and_train_meta(const DataMatrix& meta, std::span<const double> y, std::span<const int> row_fold,
                              int k, const TunerConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_trials);
  std::vector<TrialRecord> log(n);
  std::vector<std::vector<double>> preds(n);
  parallel_for(n, [&](std::size_t t) {
    TrialRecord& rec = log[t];
    rec.trial = static_cast<int>(t);
    rec.config = sample_trial_config(cfg.seed, rec.trial);
    preds[t] = cross_fold_predict(meta, y, row_fold, k, rec.config);
    double sum = 0.0;
    int used = 0;
    for (int f = 0; f < k; ++f) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < meta.rows; ++r)
        if (row_fold[r] == f) rows.push_back(r);
      const auto r2 = finite_r2(y, preds[t], rows);
      rec.fold_r2.push_back(r2.value_or(kNaN));
      if (r2) {
        sum += *r2;
        ++used;
      }
    }
    rec.mean_r2 = used ? sum / used : -std::numeric_limits<double>::infinity();
  });
  std::size_t best = 0;
  for (std::size_t t = 1; t < n; ++t)
    if (log[t].mean_r2 > log[best].mean_r2) best = t;
  TunedMeta out;
  out.best_trial = static_cast<int>(best);
  out.model = gbdt_fit(meta, masked_labels(y, row_fold, -2), log[best].config);
  out.oof_pred = std::move(preds[best]);
  out.log = std::move(log);
  return out;
}

void EnsembleConfig::validate() const {
  if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
  expert.validate();
  if (groups.empty()) throw ConfigError("ensemble needs at least one feature group");
  if (tuner_trials < 1) throw ConfigError("tuner_trials must be >= 1");
}

EnsembleModel train_ensemble(const Dataset& ds, const EnsembleConfig& cfg) {
  cfg.validate();
  EnsembleModel em;
  em.fold_spec = group_kfold(ds.cows, cfg.k_folds, cfg.seed);
  GbdtConfig expert = cfg.expert;
  expert.seed = derive_seed(cfg.seed, {0x657870});
  em.experts = train_experts(ds, em.fold_spec, cfg.groups, expert);
  em.global_columns = global_columns(ds.groups, cfg.global);
  em.meta_train = build_meta_matrix(em.experts, ds.x, em.global_columns, true);
  em.meta_manifest = em.meta_train.names;
  const std::vector<int> row_fold = em.fold_spec.row_folds(ds);
  TunedMeta tm = tune_and_train_meta(em.meta_train, ds.y, row_fold, cfg.k_folds,
                                     TunerConfig{cfg.tuner_trials, derive_seed(cfg.seed, {0x74756e})});
  em.meta = std::move(tm.model);
  em.tuner_log = std::move(tm.log);
  em.best_trial = tm.best_trial;
  em.meta_oof = std::move(tm.oof_pred);
  return em;
}

DataMatrix ensemble_meta_rows(const EnsembleModel& em, const DataMatrix& x) {
  x.validate();
  for (const auto& name : em.global_columns)
    if (std::find(x.names.begin(), x.names.end(), name) == x.names.end())
      throw SchemaError(fmt::format("global meta column '{}' is missing", name));
  return build_meta_matrix(em.experts, x, em.global_columns, false);
}

std::vector<double> predict_ensemble(const EnsembleModel& em, const DataMatrix& x) {
  return em.meta.predict(ensemble_meta_rows(em, x));
}

void write_tuner_log(std::ostream& out, std::span<const TrialRecord> log) {
  out << "trial,n_trees,learning_rate,max_leaves,min_samples_leaf,feature_fraction,bagging_fraction,seed,mean_r2,"
         "fold_r2\n";
  for (const auto& t : log) {
    std::string folds;
    for (std::size_t i = 0; i < t.fold_r2.size(); ++i) folds += fmt::format("{}{}", i ? ";" : "", t.fold_r2[i]);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", t.trial, t.config.n_trees, t.config.learning_rate,
                       t.config.max_leaves, t.config.min_samples_leaf, t.config.feature_fraction,
                       t.config.bagging_fraction, t.config.seed, t.mean_r2, folds);
  }
}

namespace {

void write_config(BinaryWriter& w, const GbdtConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.n_trees));
  w.f64(c.learning_rate);
  w.u32(static_cast<std::uint32_t>(c.max_leaves));
  w.u32(static_cast<std::uint32_t>(c.min_samples_leaf));
  w.f64(c.feature_fraction);
  w.f64(c.bagging_fraction);
  w.u32(static_cast<std::uint32_t>(c.n_bins));
  w.u64(c.seed);
  w.str(c.loss);
}

GbdtConfig read_config(BinaryReader& r) {
  GbdtConfig c;
  c.n_trees = static_cast<int>(r.u32());
  c.learning_rate = r.f64();
  c.max_leaves = static_cast<int>(r.u32());
  c.min_samples_leaf = static_cast<int>(r.u32());
  c.feature_fraction = r.f64();
  c.bagging_fraction = r.f64();
  c.n_bins = static_cast<int>(r.u32());
  c.seed = r.u64();
  c.loss = r.str();
  return c;
}

void write_strings(BinaryWriter& w, const std::vector<std::string>& v) {
  w.u64(v.size());
  for (const auto& s : v) w.str(s);
}

std::vector<std::string> read_strings(BinaryReader& r) {
  const std::uint64_t n = r.u64();
  if (n > (1u << 20)) throw FormatError("corrupt string list");
  std::vector<std::string> v;
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(r.str());
  return v;
}

FeatureGroupId read_group(BinaryReader& r) {
  const std::uint8_t g = r.u8();
  if (g >= kAllGroups.size()) throw FormatError("corrupt feature group id");
  return static_cast<FeatureGroupId>(g);
}

}  // namespace

void write_ensemble_body(BinaryWriter& w, const EnsembleModel& em) {
  const ExpertSet& es = em.experts;
  w.u64(es.groups.size());
  for (FeatureGroupId g : es.groups) {
    w.u8(static_cast<std::uint8_t>(g));
    const auto it = es.experts.find(g);
    w.u8(it != es.experts.end() ? 1 : 0);
    w.f64(es.val_r2.count(g) ? es.val_r2.at(g) : 0.0);
    w.f64(es.weights.at(g));
    if (it != es.experts.end()) write_gbdt_body(w, it->second);
  }
  w.u8(es.uniform_fallback ? 1 : 0);
  write_gbdt_body(w, em.meta);
  write_strings(w, em.meta_manifest);
  write_strings(w, em.global_columns);
  w.u64(em.tuner_log.size());
  for (const auto& t : em.tuner_log) {
    w.u32(static_cast<std::uint32_t>(t.trial));
    write_config(w, t.config);
    w.f64(t.mean_r2);
    w.f64s(t.fold_r2);
  }
  w.u32(static_cast<std::uint32_t>(em.best_trial));
  w.u32(static_cast<std::uint32_t>(em.fold_spec.k));
  w.u64(em.fold_spec.seed);
  w.u64(em.fold_spec.cows.size());
  for (std::size_t i = 0; i < em.fold_spec.cows.size(); ++i) {
    w.str(em.fold_spec.cows[i].str());
    w.u32(static_cast<std::uint32_t>(em.fold_spec.fold_of_cow[i]));
  }
}

EnsembleModel read_ensemble_body(BinaryReader& r) {
  EnsembleModel em;
  ExpertSet& es = em.experts;
  const std::uint64_t n_groups = r.u64();
  if (n_groups > kAllGroups.size()) throw FormatError("corrupt expert count");
  for (std::uint64_t i = 0; i < n_groups; ++i) {
    const FeatureGroupId g = read_group(r);
    const bool has_model = r.u8() != 0;
    const double r2 = r.f64();
    es.groups.push_back(g);
    es.weights[g] = r.f64();
    if (has_model) {
      es.val_r2[g] = r2;
      es.experts.emplace(g, read_gbdt_body(r));
    }
  }
  es.uniform_fallback = r.u8() != 0;
  em.meta = read_gbdt_body(r);
  em.meta_manifest = read_strings(r);
  em.global_columns = read_strings(r);
  const std::uint64_t n_trials = r.u64();
  if (n_trials > (1u << 20)) throw FormatError("corrupt tuner log");
  for (std::uint64_t i = 0; i < n_trials; ++i) {
    TrialRecord t;
    t.trial = static_cast<int>(r.u32());
    t.config = read_config(r);
    t.mean_r2 = r.f64();
    t.fold_r2 = r.f64s();
    em.tuner_log.push_back(std::move(t));
  }
  em.best_trial = static_cast<int>(r.u32());
  em.fold_spec.k = static_cast<int>(r.u32());
  em.fold_spec.seed = r.u64();
  const std::uint64_t n_cows = r.u64();
  if (n_cows > (1u << 20)) throw FormatError("corrupt fold spec");
  for (std::uint64_t i = 0; i < n_cows; ++i) {
    em.fold_spec.cows.emplace_back(r.str());
    em.fold_spec.fold_of_cow.push_back(static_cast<int>(r.u32()));
  }
  if (em.meta.manifest() != em.meta_manifest) throw FormatError("meta manifest does not match the meta model");
  return em;
}

}  // namespace herdtwin
