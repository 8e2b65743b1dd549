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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <herdtwin/ingest.hpp>
#include <herdtwin/pipeline.hpp>
#include <herdtwin/synth.hpp>

namespace herdtwin::app {

/// Every configurable value of a run. Sections mirror the INI file.
struct RunConfig {
  std::uint64_t seed = 42;
  unsigned jobs = 0;
  int eval_k = 5;
  bool noiseless = false;
  IngestConfig ingest;
  SynthConfig synth;
  PipelineConfig pipeline;

  /// Copies the run seed into the synth and ensemble seeds.
  void apply_seed();
  /// Throws ConfigError.
  void validate() const;
};

/// Names of all accepted keys as "section.key", in dump order.
std::vector<std::string> config_keys();
/// Sets one key from text. Throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Applies an INI file on top of cfg. Keys outside a section and unknown
/// keys are rejected. Returns true when the file set run.seed.
bool load_config_file(RunConfig& cfg, const std::filesystem::path& path);
/// Applies an INI document from a stream.
bool load_config_stream(RunConfig& cfg, std::istream& in, const std::string& source = "<stream>");
/// Every key with its effective value, loadable by load_config_file.
void write_effective_config(std::ostream& out, const RunConfig& cfg);

}  // namespace herdtwin::app
