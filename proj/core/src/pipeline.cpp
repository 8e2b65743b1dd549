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

#include "herdtwin/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/binary_io.hpp"
#include "herdtwin/errors.hpp"
#include "herdtwin/parallel.hpp"
#include "herdtwin/rng.hpp"

namespace herdtwin {

void UncertaintyConfig::validate() const {
  if (bootstrap_b < 2) throw ConfigError("bootstrap_b must be >= 2");
  if (!(target_coverage > 0.0 && target_coverage < 1.0)) throw ConfigError("target_coverage must be in (0, 1)");
  if (!(sigma_min >= 0.0)) throw ConfigError("sigma_min must be >= 0");
  if (!(z > 0.0)) throw ConfigError("z must be > 0");
}

void HeadsConfig::validate() const {
  if (!std::isfinite(theta)) throw ConfigError("theta must be finite");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
}

void PipelineConfig::validate() const {
  twin.validate();
  features.validate();
  ensemble.validate();
  uncertainty.validate();
  heads.validate();
  if (row_stride < 1) throw ConfigError("row_stride must be >= 1");
  if (twin.horizon_minutes != features.horizon_minutes)
    throw ConfigError(fmt::format("twin horizon {} differs from feature horizon {}", twin.horizon_minutes,
                                  features.horizon_minutes));
}

std::vector<FeatureMatrix> build_features(std::span<const AlignedFrame> frames, const TwinConfig& twin,
                                          const FeatureConfig& features, bool use_twin) {
  std::vector<FeatureMatrix> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    if (use_twin) {
      const TwinRun run = run_twin(frames[i], twin);
      out[i] = assemble(attach_dt_features(frames[i], run), features);
    } else {
      out[i] = assemble(frames[i], features);
    }
  });
  return out;
}

Dataset drop_group(const Dataset& ds, FeatureGroupId g) {
  Dataset out = ds;
  const FeatureGroup* fg = ds.group(g);
  if (!fg) return out;
  DataMatrix x;
  x.rows = ds.x.rows;
  for (std::size_t c = 0; c < ds.x.n_cols(); ++c) {
    if (std::find(fg->columns.begin(), fg->columns.end(), ds.x.names[c]) != fg->columns.end()) continue;
    x.names.push_back(ds.x.names[c]);
    x.cols.push_back(ds.x.cols[c]);
  }
  out.x = std::move(x);
  std::erase_if(out.groups, [&](const FeatureGroup& e) { return e.id == g; });
  return out;
}

DataMatrix Bundle::final_stage_rows(const DataMatrix& x) const {
  if (!single_group) return ensemble_meta_rows(ensemble, x);
  const GbdtModel& m = final_stage();
  DataMatrix out;
  out.rows = x.rows;
  for (const auto& name : m.manifest()) {
    const auto pos = std::find(x.names.begin(), x.names.end(), name);
    if (pos == x.names.end())
      throw SchemaError(fmt::format("feature group '{}' is missing column '{}'", to_string(*single_group), name));
    out.names.push_back(name);
    out.cols.push_back(x.cols[static_cast<std::size_t>(pos - x.names.begin())]);
  }
  return out;
}

const GbdtModel& Bundle::final_stage() const {
  if (!single_group) return ensemble.meta;
  const auto it = ensemble.experts.experts.find(*single_group);
  if (it == ensemble.experts.experts.end()) throw ModelError("single-group bundle without its expert");
  return it->second;
}

Bundle train_bundle(const Dataset& ds, const PipelineConfig& cfg, std::optional<FeatureGroupId> single_group) {
  cfg.validate();
  if (std::none_of(ds.y.begin(), ds.y.end(), [](double v) { return std::isfinite(v); }))
    throw TrainingError("no labels: no row has an observed CBT at the forecast horizon");
  Bundle b;
  b.single_group = single_group;
  b.theta = cfg.heads.theta;
  b.training_cows = ds.cows;
  std::sort(b.training_cows.begin(), b.training_cows.end());

  DataMatrix stage_x;
  std::vector<double> stage_oof;
  GbdtConfig final_cfg;
  if (single_group) {
    EnsembleModel& em = b.ensemble;
    em.fold_spec = group_kfold(ds.cows, cfg.ensemble.k_folds, cfg.ensemble.seed);
    GbdtConfig expert = cfg.ensemble.expert;
    expert.seed = derive_seed(cfg.ensemble.seed, {0x657870});
    const FeatureGroupId g = *single_group;
    em.experts = train_experts(ds, em.fold_spec, std::span<const FeatureGroupId>(&g, 1), expert);
    if (!em.experts.experts.count(g))
      throw TrainingError(fmt::format("feature group '{}' has no usable columns", to_string(g)));
    stage_x = b.final_stage_rows(ds.x);
    stage_oof = em.experts.oof_pred.at(g);
    final_cfg = em.experts.experts.at(g).config();
  } else {
    b.ensemble = train_ensemble(ds, cfg.ensemble);
    stage_x = b.ensemble.meta_train;
    stage_oof = b.ensemble.meta_oof;
    final_cfg = b.ensemble.meta.config();
  }

  b.bootstrap = bootstrap_fit(stage_x, ds.y, ds.cow_of_row, ds.cows, final_cfg, cfg.uncertainty.bootstrap_b,
                              derive_seed(cfg.ensemble.seed, {0x626f6f74}));
  const std::vector<double> sigma = sigma_raw_oob(b.bootstrap, stage_x, ds.cow_of_row);
  std::vector<double> yv, pv, sv;
  std::vector<double> stress_pred;
  std::vector<int> stress_truth;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (!std::isfinite(stage_oof[r])) continue;
    if (std::isfinite(ds.y[r])) {
      yv.push_back(ds.y[r]);
      pv.push_back(stage_oof[r]);
      sv.push_back(sigma[r]);
    }
    if (ds.y_stress[r] >= 0) {
      stress_pred.push_back(stage_oof[r]);
      stress_truth.push_back(ds.y_stress[r]);
    }
  }
  b.calibration = calibrate(pv, sv, yv, cfg.uncertainty.target_coverage, cfg.uncertainty.sigma_min, cfg.uncertainty.z);
  b.beta = cfg.heads.calibrate ? calibrate_beta(stress_pred, stress_truth, cfg.heads.theta) : cfg.heads.beta;
  return b;
}

BundlePrediction predict_bundle(const Bundle& b, const DataMatrix& x) {
  const DataMatrix sx = b.final_stage_rows(x);
  BundlePrediction p;
  p.y_hat = b.final_stage().predict(sx);
  p.sigma_raw = sigma_raw(b.bootstrap, sx);
  const std::size_t n = x.rows;
  p.lo.resize(n);
  p.hi.resize(n);
  p.p_stress.resize(n);
  p.label.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::tie(p.lo[r], p.hi[r]) = interval(p.y_hat[r], p.sigma_raw[r], b.calibration);
    p.p_stress[r] = stress_probability(p.y_hat[r], b.theta, b.beta);
    p.label[r] = stress_label(p.y_hat[r], b.theta);
  }
  return p;
}

std::vector<ForecastRecord> forecast(const Bundle& b, const Dataset& ds) {
  const BundlePrediction p = predict_bundle(b, ds.x);
  std::vector<ForecastRecord> out;
  out.reserve(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r)
    out.push_back(make_forecast(ds.cows[ds.cow_of_row[r]], ds.time_of_row[r], p.y_hat[r], p.lo[r], p.hi[r], b.theta,
                                b.beta));
  return out;
}

void write_bundle(std::ostream& out, const Bundle& b) {
  out << kBundleMagic << '\n';
  BinaryWriter w(out);
  w.u8(b.single_group ? 1 + static_cast<std::uint8_t>(*b.single_group) : 0);
  write_ensemble_body(w, b.ensemble);
  write_bootstrap_body(w, b.bootstrap);
  w.f64(b.calibration.alpha);
  w.f64(b.calibration.sigma_min);
  w.f64(b.calibration.z);
  w.u8(b.calibration.under_coverage ? 1 : 0);
  w.f64(b.beta);
  w.f64(b.theta);
  w.u64(b.training_cows.size());
  for (const auto& c : b.training_cows) w.str(c.str());
}

Bundle read_bundle(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic)) throw FormatError("empty bundle");
  if (magic != kBundleMagic) throw VersionError(std::string(kBundleMagic), magic);
  BinaryReader r(in);
  Bundle b;
  const std::uint8_t sg = r.u8();
  if (sg > kAllGroups.size()) throw FormatError("corrupt bundle mode");
  if (sg) b.single_group = static_cast<FeatureGroupId>(sg - 1);
  b.ensemble = read_ensemble_body(r);
  b.bootstrap = read_bootstrap_body(r);
  b.calibration.alpha = r.f64();
  b.calibration.sigma_min = r.f64();
  b.calibration.z = r.f64();
  b.calibration.under_coverage = r.u8() != 0;
  b.beta = r.f64();
  b.theta = r.f64();
  const std::uint64_t n = r.u64();
  if (n > (1u << 20)) throw FormatError("corrupt training cow list");
  for (std::uint64_t i = 0; i < n; ++i) b.training_cows.emplace_back(r.str());
  b.calibration.validate();
  return b;
}

void write_bundle_file(const std::filesystem::path& path, const Bundle& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_bundle(out, b);
}

Bundle read_bundle_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_bundle(in);
}

}  // namespace herdtwin
