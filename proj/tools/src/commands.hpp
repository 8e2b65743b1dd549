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
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace herdtwin::app {

/// Options shared by every command; flags override the config file, which
/// overrides the defaults.
struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<int> max_gap_seconds;
  std::optional<int> step_minutes;
  std::vector<std::string> agg;
};

/// Defaults, then the config file, then TWIN_SEED when no seed was given,
/// then flags. Validates the result.
RunConfig resolve_config(const CommonOptions& opts);

void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_ingest(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);
void cmd_twin(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);
void cmd_features(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                  bool csv);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& model_out);
void cmd_predict(const RunConfig& cfg, const std::filesystem::path& model, const std::filesystem::path& data_dir,
                 const std::filesystem::path& out_file);
void cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);
void cmd_ablate(const RunConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);

/// Parses arguments and dispatches. Returns 0 on success, 1 on runtime
/// errors and 2 on usage or configuration errors.
int run_cli(int argc, char** argv);

}  // namespace herdtwin::app
