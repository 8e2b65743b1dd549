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

#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <herdtwin/errors.hpp>
#include <herdtwin/evaluation.hpp>
#include <herdtwin/frame_io.hpp>
#include <herdtwin/parallel.hpp>

namespace herdtwin::app {

namespace fs = std::filesystem;

namespace {

/// Name of the stage being executed, reported with errors.
std::string& current_stage() {
  static std::string stage = "startup";
  return stage;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  current_stage() = name;
  spdlog::info("stage: {}", name);
  return fn();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  return out;
}

void write_config_file(const fs::path& path, const RunConfig& cfg) {
  auto out = open_out(path);
  write_effective_config(out, cfg);
}

std::vector<AlignedFrame> load_frames(const RunConfig& cfg, const fs::path& data_dir, IngestReport* report = nullptr) {
  return stage("ingest", [&] {
    auto frames = ingest_directory(data_dir, cfg.ingest, report);
    if (frames.empty()) throw IoError(fmt::format("no cow data found under '{}'", data_dir.string()));
    spdlog::info("ingested {} cows", frames.size());
    return frames;
  });
}

std::vector<FeatureMatrix> load_features(const RunConfig& cfg, const fs::path& data_dir) {
  const auto frames = load_frames(cfg, data_dir);
  return stage(cfg.pipeline.use_twin ? "twin+features" : "features", [&] {
    return build_features(frames, cfg.pipeline.twin, cfg.pipeline.features, cfg.pipeline.use_twin);
  });
}

Dataset labeled_dataset(const RunConfig& cfg, const std::vector<FeatureMatrix>& fms) {
  Dataset ds = make_dataset(fms, cfg.pipeline.row_stride, true);
  if (ds.rows() == 0) throw TrainingError("no labels: no minute has an observed CBT at the forecast horizon");
  return ds;
}

}  // namespace

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg;
  bool seed_given = false;
  if (opts.config) seed_given = load_config_file(cfg, *opts.config);
  if (!seed_given && !opts.seed) {
    if (const char* env = std::getenv("TWIN_SEED"); env && *env) set_config_value(cfg, "run.seed", env);
  }
  for (const auto& kv : opts.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects section.key=value, got '{}'", kv));
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.jobs) cfg.jobs = *opts.jobs;
  if (opts.max_gap_seconds) cfg.ingest.max_gap_seconds = *opts.max_gap_seconds;
  if (opts.step_minutes) cfg.ingest.step_minutes = *opts.step_minutes;
  for (const auto& kv : opts.agg) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--agg expects modality=mode, got '{}'", kv));
    set_config_value(cfg, "ingest.agg_" + kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.apply_seed();
  if (cfg.noiseless) cfg.synth.make_noiseless();
  cfg.validate();
  return cfg;
}

void cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  const SynthHerd herd = stage("simulate", [&] { return simulate_herd(cfg.synth); });
  stage("write", [&] {
    write_herd(herd, out_dir);
    write_config_file(out_dir / "effective_config.ini", cfg);
  });
}

void cmd_ingest(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  IngestReport report;
  const auto frames = load_frames(cfg, data_dir, &report);
  stage("write", [&] {
    fs::create_directories(out_dir);
    for (const auto& f : frames) write_frame_file(out_dir / (f.cow().str() + ".frame"), f);
    auto out = open_out(out_dir / "ingest_report.csv");
    out << "modality,records,malformed_lines\n";
    for (const auto& [m, n] : report.records) {
      const auto it = report.malformed_lines.find(m);
      out << fmt::format("{},{},{}\n", to_string(m), n, it == report.malformed_lines.end() ? 0 : it->second.size());
    }
    write_config_file(out_dir / "effective_config.ini", cfg);
  });
}

void cmd_twin(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const auto frames = load_frames(cfg, data_dir);
  std::vector<TwinRun> runs(frames.size());
  stage("twin", [&] { parallel_for(frames.size(), [&](std::size_t i) { runs[i] = run_twin(frames[i], cfg.pipeline.twin); }); });
  stage("write", [&] {
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const std::string cow = frames[i].cow().str();
      write_frame_file(out_dir / (cow + ".frame"), attach_dt_features(frames[i], runs[i]));
      write_params_file(out_dir / (cow + ".params"), runs[i].final_params);
    }
    write_config_file(out_dir / "effective_config.ini", cfg);
  });
}

void cmd_features(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, bool csv) {
  const auto fms = load_features(cfg, data_dir);
  stage("write", [&] {
    fs::create_directories(out_dir);
    for (const auto& fm : fms) {
      write_features_file(out_dir / (fm.cow->str() + ".feat"), fm);
      if (csv) {
        auto out = open_out(out_dir / (fm.cow->str() + ".csv"));
        write_features_csv(out, fm);
      }
    }
    write_config_file(out_dir / "effective_config.ini", cfg);
  });
}

void cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& model_out) {
  const auto fms = load_features(cfg, data_dir);
  const Dataset ds = stage("dataset", [&] { return labeled_dataset(cfg, fms); });
  spdlog::info("training on {} rows of {} cows", ds.rows(), ds.cows.size());
  const Bundle b = stage("train", [&] { return train_bundle(ds, cfg.pipeline); });
  stage("write", [&] {
    if (model_out.has_parent_path()) fs::create_directories(model_out.parent_path());
    write_bundle_file(model_out, b);
    fs::path stem = model_out;
    stem.replace_extension();
    write_config_file(stem.string() + ".config.ini", cfg);
    auto log = open_out(stem.string() + ".tuner_log.csv");
    write_tuner_log(log, b.ensemble.tuner_log);
  });
  spdlog::info("bundle written to '{}' (alpha {:.1f}, beta {})", model_out.string(), b.calibration.alpha, b.beta);
}

void cmd_predict(const RunConfig& cfg, const fs::path& model, const fs::path& data_dir, const fs::path& out_file) {
  const Bundle b = stage("load-model", [&] { return read_bundle_file(model); });
  const auto fms = load_features(cfg, data_dir);
  stage("predict", [&] {
    auto out = open_out(out_file);
    write_forecast_header(out);
    const auto h = static_cast<std::size_t>(cfg.pipeline.features.horizon_minutes);
    std::size_t written = 0;
    for (const auto& fm : fms) {
      Dataset ds = make_dataset(std::span<const FeatureMatrix>(&fm, 1), 1, false);
      // Minutes whose forecast target still falls inside the recording.
      const std::size_t eligible = fm.rows > h ? fm.rows - h : 0;
      std::vector<std::size_t> rows(eligible);
      for (std::size_t r = 0; r < eligible; ++r) rows[r] = r;
      ds = ds.select_rows(rows);
      if (ds.rows() == 0) continue;
      for (const auto& rec : forecast(b, ds)) write_forecast_line(out, rec);
      written += ds.rows();
    }
    spdlog::info("wrote {} forecast records to '{}'", written, out_file.string());
  });
}

void cmd_evaluate(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const auto fms = load_features(cfg, data_dir);
  const Dataset ds = stage("dataset", [&] { return labeled_dataset(cfg, fms); });
  const CvResult res = stage("cross-validation", [&] { return run_cv(ds, cfg.pipeline, cfg.eval_k); });
  stage("write", [&] {
    fs::create_directories(out_dir);
    auto rep = open_out(out_dir / "cv_report.csv");
    write_cv_report(rep, res);
    auto sum = open_out(out_dir / "summary.txt");
    write_cv_summary(sum, res);
    auto resid = open_out(out_dir / "residuals.csv");
    write_residuals(resid, ds, res);
    auto roc = open_out(out_dir / "roc.csv");
    write_roc(roc, ds, res);
    write_config_file(out_dir / "effective_config.ini", cfg);
  });
  write_cv_summary(std::cout, res);
}

void cmd_ablate(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  const auto fms = load_features(cfg, data_dir);
  const Dataset ds = stage("dataset", [&] { return labeled_dataset(cfg, fms); });
  const auto groups = stage("group-ablation", [&] { return ablate_feature_groups(ds, cfg.pipeline, cfg.eval_k); });
  const DtAblation dt = stage("twin-ablation", [&] {
    if (!ds.group(FeatureGroupId::dt_features))
      throw ConfigError("twin ablation needs dt_features; set run.use_twin = true");
    return ablate_digital_twin(ds, cfg.pipeline, cfg.eval_k, groups.back().result);
  });
  stage("write", [&] {
    fs::create_directories(out_dir);
    auto g = open_out(out_dir / "ablation_groups.csv");
    write_group_ablation(g, groups);
    auto d = open_out(out_dir / "ablation_dt.csv");
    write_dt_ablation(d, dt);
    write_config_file(out_dir / "effective_config.ini", cfg);
  });
  write_group_ablation(std::cout, groups);
  write_dt_ablation(std::cout, dt);
}

int run_cli(int argc, char** argv) {
  spdlog::drop("herdtwin");
  spdlog::set_default_logger(spdlog::stderr_color_st("herdtwin"));
  spdlog::set_pattern("[%l] %v");
  current_stage() = "startup";

  CLI::App app{"Per-animal digital twin and stacked-ensemble CBT forecasting"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  CommonOptions opts;
  fs::path data_dir, out_dir, model, out_file;
  bool csv = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--set", opts.set, "Override a key: section.key=value (repeatable)");
    sub->add_option("--seed", opts.seed, "Global seed (falls back to TWIN_SEED)");
    sub->add_option("-j,--jobs", opts.jobs, "Worker cap; 0 uses all cores");
    sub->add_option("--max-gap-seconds", opts.max_gap_seconds, "Longest gap filled during resampling");
    sub->add_option("--step-minutes", opts.step_minutes, "Output grid step");
    sub->add_option("--agg", opts.agg, "Per-modality aggregation: modality=mean|last|max (repeatable)");
  };

  auto* sim = app.add_subcommand("simulate", "Write a synthetic herd (raw sensor files and truth)");
  common(sim);
  sim->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* ing = app.add_subcommand("ingest", "Align raw sensor files into per-cow frames");
  common(ing);
  ing->add_option("-d,--data", data_dir, "Data directory")->required();
  ing->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* twin = app.add_subcommand("twin", "Run the digital twin over every cow");
  common(twin);
  twin->add_option("-d,--data", data_dir, "Data directory")->required();
  twin->add_option("-o,--out", out_dir, "Output directory")->required();

  auto* feat = app.add_subcommand("features", "Assemble feature matrices");
  common(feat);
  feat->add_option("-d,--data", data_dir, "Data directory")->required();
  feat->add_option("-o,--out", out_dir, "Output directory")->required();
  feat->add_flag("--csv", csv, "Also write CSV copies");

  auto* train = app.add_subcommand("train", "Train the stacked ensemble bundle");
  common(train);
  train->add_option("-d,--data", data_dir, "Data directory")->required();
  train->add_option("-m,--model", model, "Bundle output path")->required();

  auto* pred = app.add_subcommand("predict", "Forecast CBT at the horizon for every eligible minute");
  common(pred);
  pred->add_option("-m,--model", model, "Trained bundle")->required()->check(CLI::ExistingFile);
  pred->add_option("-d,--data", data_dir, "Data directory")->required();
  pred->add_option("-o,--out", out_file, "Forecast CSV")->required();

  auto* eval = app.add_subcommand("evaluate", "Cow-grouped cross-validation report");
  common(eval);
  eval->add_option("-d,--data", data_dir, "Data directory")->required();
  eval->add_option("-o,--out", out_dir, "Report directory")->required();

  auto* abl = app.add_subcommand("ablate", "Feature-group and digital-twin ablations");
  common(abl);
  abl->add_option("-d,--data", data_dir, "Data directory")->required();
  abl->add_option("-o,--out", out_dir, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    const RunConfig cfg = resolve_config(opts);
    set_max_jobs(cfg.jobs);
    if (sim->parsed()) cmd_simulate(cfg, out_dir);
    else if (ing->parsed()) cmd_ingest(cfg, data_dir, out_dir);
    else if (twin->parsed()) cmd_twin(cfg, data_dir, out_dir);
    else if (feat->parsed()) cmd_features(cfg, data_dir, out_dir, csv);
    else if (train->parsed()) cmd_train(cfg, data_dir, model);
    else if (pred->parsed()) cmd_predict(cfg, model, data_dir, out_file);
    else if (eval->parsed()) cmd_evaluate(cfg, data_dir, out_dir);
    else if (abl->parsed()) cmd_ablate(cfg, data_dir, out_dir);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{} failed: {}", current_stage(), e.what());
    return 1;
  }
  return 0;
}

}  // namespace herdtwin::app
