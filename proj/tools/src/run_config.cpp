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

#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <herdtwin/errors.hpp>
#include <herdtwin/parallel.hpp>

namespace herdtwin::app {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError(fmt::format("invalid value '{}' for '{}'", text, key));
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(fmt::format("invalid boolean '{}' for '{}'", text, key));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string show(double v) { return fmt::format("{}", v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string show(T v) requires std::is_integral_v<T> { return std::to_string(v); }

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T, typename Access>
Key number_key(std::string name, Access access) {
  return Key{std::move(name),
             [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); },
             [access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_number<T>(k, v); }};
}

template <typename Access>
Key bool_key(std::string name, Access access) {
  return Key{std::move(name), [access](const RunConfig& c) { return show(access(const_cast<RunConfig&>(c))); },
             [access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_bool(k, v); }};
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    // [run]
    k.push_back(number_key<std::uint64_t>("run.seed", [](RunConfig& c) -> auto& { return c.seed; }));
    k.push_back(number_key<unsigned>("run.jobs", [](RunConfig& c) -> auto& { return c.jobs; }));
    k.push_back(number_key<int>("run.eval_k", [](RunConfig& c) -> auto& { return c.eval_k; }));
    k.push_back(number_key<std::size_t>("run.row_stride", [](RunConfig& c) -> auto& { return c.pipeline.row_stride; }));
    k.push_back(bool_key("run.use_twin", [](RunConfig& c) -> auto& { return c.pipeline.use_twin; }));
    // [ingest]
    k.push_back(number_key<int>("ingest.max_gap_seconds", [](RunConfig& c) -> auto& { return c.ingest.max_gap_seconds; }));
    k.push_back(number_key<int>("ingest.step_minutes", [](RunConfig& c) -> auto& { return c.ingest.step_minutes; }));
    for (ModalityId m : kSensorModalities) {
      k.push_back(Key{fmt::format("ingest.agg_{}", to_string(m)),
                      [m](const RunConfig& c) { return std::string(to_string(c.ingest.aggregation_for(m))); },
                      [m](RunConfig& c, const std::string&, const std::string& v) {
                        c.ingest.aggregation[m] = aggregation_from_string(v);
                      }});
    }
    // [synth]
    k.push_back(number_key<int>("synth.n_cows", [](RunConfig& c) -> auto& { return c.synth.n_cows; }));
    k.push_back(number_key<int>("synth.days", [](RunConfig& c) -> auto& { return c.synth.days; }));
    k.push_back(Key{"synth.start", [](const RunConfig& c) { return c.synth.start.iso(); },
                    [](RunConfig& c, const std::string& key, const std::string& v) {
                      std::int64_t s = 0;
                      try {
                        s = parse_iso_seconds(v);
                      } catch (const Error&) {
                        throw ConfigError(fmt::format("invalid timestamp '{}' for '{}'", v, key));
                      }
                      if (s % 60 != 0) throw ConfigError(fmt::format("'{}' must be a whole minute", key));
                      c.synth.start = Timestamp{s / 60};
                    }});
    k.push_back(number_key<int>("synth.tz_offset_minutes", [](RunConfig& c) -> auto& { return c.synth.tz_offset_minutes; }));
    k.push_back(number_key<double>("synth.param_spread", [](RunConfig& c) -> auto& { return c.synth.param_spread; }));
    k.push_back(number_key<double>("synth.t_set_spread", [](RunConfig& c) -> auto& { return c.synth.t_set_spread; }));
    k.push_back(bool_key("synth.noiseless", [](RunConfig& c) -> auto& { return c.noiseless; }));
    k.push_back(number_key<double>("synth.thi_base", [](RunConfig& c) -> auto& { return c.synth.thi.base; }));
    k.push_back(number_key<double>("synth.thi_amplitude", [](RunConfig& c) -> auto& { return c.synth.thi.amplitude; }));
    k.push_back(number_key<double>("synth.thi_peak_hour", [](RunConfig& c) -> auto& { return c.synth.thi.peak_hour; }));
    k.push_back(number_key<double>("synth.heat_wave_prob", [](RunConfig& c) -> auto& { return c.synth.thi.heat_wave_prob; }));
    k.push_back(number_key<double>("synth.heat_wave_amplitude", [](RunConfig& c) -> auto& { return c.synth.thi.heat_wave_amplitude; }));
    k.push_back(number_key<double>("synth.heat_wave_min_hours", [](RunConfig& c) -> auto& { return c.synth.thi.heat_wave_min_hours; }));
    k.push_back(number_key<double>("synth.heat_wave_max_hours", [](RunConfig& c) -> auto& { return c.synth.thi.heat_wave_max_hours; }));
    k.push_back(number_key<int>("synth.immu_period_seconds", [](RunConfig& c) -> auto& { return c.synth.immu_period_seconds; }));
    k.push_back(number_key<double>("synth.activity_scale", [](RunConfig& c) -> auto& { return c.synth.activity_scale; }));
    for (ModalityId m : kSensorModalities) {
      const std::string mod(to_string(m));
      k.push_back(number_key<double>("synth.noise_" + mod, [m](RunConfig& c) -> auto& { return c.synth.noise[m]; }));
      k.push_back(number_key<double>("synth.dropout_rate_" + mod, [m](RunConfig& c) -> auto& { return c.synth.dropout[m].rate; }));
      k.push_back(number_key<double>("synth.dropout_gap_" + mod, [m](RunConfig& c) -> auto& { return c.synth.dropout[m].mean_gap; }));
    }
    // [twin]
    k.push_back(number_key<double>("twin.feedback_rate", [](RunConfig& c) -> auto& { return c.pipeline.twin.feedback_rate; }));
    k.push_back(number_key<int>("twin.horizon_minutes", [](RunConfig& c) -> auto& { return c.pipeline.twin.horizon_minutes; }));
    k.push_back(number_key<double>("twin.theta_stress", [](RunConfig& c) -> auto& { return c.pipeline.twin.theta_stress; }));
    k.push_back(number_key<double>("twin.stress_slope", [](RunConfig& c) -> auto& { return c.pipeline.twin.stress_slope; }));
    k.push_back(number_key<double>("twin.activity_scale", [](RunConfig& c) -> auto& { return c.pipeline.twin.activity_scale; }));
    k.push_back(number_key<double>("twin.default_thi", [](RunConfig& c) -> auto& { return c.pipeline.twin.default_thi; }));
    k.push_back(number_key<double>("twin.q_core", [](RunConfig& c) -> auto& { return c.pipeline.twin.noise.Q(0, 0); }));
    k.push_back(number_key<double>("twin.q_rate", [](RunConfig& c) -> auto& { return c.pipeline.twin.noise.Q(1, 1); }));
    k.push_back(number_key<double>("twin.q_activity", [](RunConfig& c) -> auto& { return c.pipeline.twin.noise.Q(2, 2); }));
    k.push_back(number_key<double>("twin.r_cbt", [](RunConfig& c) -> auto& { return c.pipeline.twin.noise.r_cbt; }));
    k.push_back(number_key<double>("twin.r_activity", [](RunConfig& c) -> auto& { return c.pipeline.twin.noise.r_activity; }));
    k.push_back(number_key<double>("twin.gp_sigma_c2", [](RunConfig& c) -> auto& { return c.pipeline.twin.gp.sigma_c2; }));
    k.push_back(number_key<double>("twin.gp_length_scale", [](RunConfig& c) -> auto& { return c.pipeline.twin.gp.length_scale; }));
    k.push_back(number_key<double>("twin.gp_sigma_n2", [](RunConfig& c) -> auto& { return c.pipeline.twin.gp.sigma_n2; }));
    k.push_back(number_key<std::size_t>("twin.gp_window", [](RunConfig& c) -> auto& { return c.pipeline.twin.gp.window; }));
    k.push_back(number_key<int>("twin.gp_push_every", [](RunConfig& c) -> auto& { return c.pipeline.twin.gp.push_every; }));
    k.push_back(number_key<int>("twin.gp_refit_every_minutes", [](RunConfig& c) -> auto& { return c.pipeline.twin.gp.refit_every_minutes; }));
    // [features]
    k.push_back(Key{"features.windows",
                    [](const RunConfig& c) {
                      std::string s;
                      for (int w : c.pipeline.features.windows) s += (s.empty() ? "" : ",") + std::to_string(w);
                      return s;
                    },
                    [](RunConfig& c, const std::string& key, const std::string& v) {
                      c.pipeline.features.windows.clear();
                      for (const auto& item : split_list(v)) c.pipeline.features.windows.push_back(parse_number<int>(key, item));
                    }});
    k.push_back(number_key<int>("features.horizon_minutes", [](RunConfig& c) -> auto& { return c.pipeline.features.horizon_minutes; }));
    k.push_back(number_key<double>("features.tau", [](RunConfig& c) -> auto& { return c.pipeline.features.tau; }));
    k.push_back(number_key<double>("features.theta_stress", [](RunConfig& c) -> auto& { return c.pipeline.features.theta_stress; }));
    k.push_back(number_key<double>("features.activity_scale", [](RunConfig& c) -> auto& { return c.pipeline.features.activity_scale; }));
    k.push_back(number_key<int>("features.zone_grid", [](RunConfig& c) -> auto& { return c.pipeline.features.zone_grid; }));
    // [gbdt]: expert models; the meta model is tuned
    k.push_back(number_key<int>("gbdt.n_trees", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.n_trees; }));
    k.push_back(number_key<double>("gbdt.learning_rate", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.learning_rate; }));
    k.push_back(number_key<int>("gbdt.max_leaves", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.max_leaves; }));
    k.push_back(number_key<int>("gbdt.min_samples_leaf", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.min_samples_leaf; }));
    k.push_back(number_key<double>("gbdt.feature_fraction", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.feature_fraction; }));
    k.push_back(number_key<double>("gbdt.bagging_fraction", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.bagging_fraction; }));
    k.push_back(number_key<int>("gbdt.n_bins", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.expert.n_bins; }));
    // [ensemble]
    k.push_back(number_key<int>("ensemble.k_folds", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.k_folds; }));
    k.push_back(Key{"ensemble.groups",
                    [](const RunConfig& c) {
                      std::string s;
                      for (auto g : c.pipeline.ensemble.groups) s += (s.empty() ? "" : ",") + std::string(to_string(g));
                      return s;
                    },
                    [](RunConfig& c, const std::string&, const std::string& v) {
                      c.pipeline.ensemble.groups.clear();
                      for (const auto& item : split_list(v)) c.pipeline.ensemble.groups.push_back(group_from_string(item));
                    }});
    k.push_back(Key{"ensemble.global_features",
                    [](const RunConfig& c) { return std::string(to_string(c.pipeline.ensemble.global)); },
                    [](RunConfig& c, const std::string&, const std::string& v) {
                      c.pipeline.ensemble.global = global_features_from_string(v);
                    }});
    k.push_back(number_key<int>("ensemble.tuner_trials", [](RunConfig& c) -> auto& { return c.pipeline.ensemble.tuner_trials; }));
    // [uncertainty]
    k.push_back(number_key<int>("uncertainty.bootstrap_b", [](RunConfig& c) -> auto& { return c.pipeline.uncertainty.bootstrap_b; }));
    k.push_back(number_key<double>("uncertainty.target_coverage", [](RunConfig& c) -> auto& { return c.pipeline.uncertainty.target_coverage; }));
    k.push_back(number_key<double>("uncertainty.sigma_min", [](RunConfig& c) -> auto& { return c.pipeline.uncertainty.sigma_min; }));
    k.push_back(number_key<double>("uncertainty.z", [](RunConfig& c) -> auto& { return c.pipeline.uncertainty.z; }));
    // [heads]
    k.push_back(number_key<double>("heads.theta", [](RunConfig& c) -> auto& { return c.pipeline.heads.theta; }));
    k.push_back(bool_key("heads.calibrate_beta", [](RunConfig& c) -> auto& { return c.pipeline.heads.calibrate; }));
    k.push_back(number_key<double>("heads.beta", [](RunConfig& c) -> auto& { return c.pipeline.heads.beta; }));
    return k;
  }();
  return keys;
}

const Key& find_key(const std::string& name) {
  for (const auto& k : registry())
    if (k.name == name) return k;
  throw ConfigError(fmt::format("unknown configuration key '{}'", name));
}

}  // namespace

void RunConfig::apply_seed() {
  synth.seed = seed;
  pipeline.ensemble.seed = seed;
}

void RunConfig::validate() const {
  if (eval_k < 2) throw ConfigError("run.eval_k must be >= 2");
  ingest.validate();
  synth.validate();
  pipeline.validate();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, key, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

bool load_config_stream(RunConfig& cfg, std::istream& in, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.message()));
  }
  bool seed_set = false;
  for (const auto& [section, body] : tree) {
    if (body.empty())
      throw ConfigError(fmt::format("{}: key '{}' outside of a section", source, section));
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      try {
        set_config_value(cfg, name, value.get_value<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", source, e.what()));
      }
      if (name == "run.seed") seed_set = true;
    }
  }
  return seed_set;
}

bool load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  return load_config_stream(cfg, in, path.string());
}

void write_effective_config(std::ostream& out, const RunConfig& cfg) {
  std::string section;
  for (const auto& k : registry()) {
    const auto dot = k.name.find('.');
    const std::string s = k.name.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    out << k.name.substr(dot + 1) << " = " << k.get(cfg) << '\n';
  }
}

}  // namespace herdtwin::app
