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
#include <map>
#include <span>
#include <string>
#include <vector>

namespace herdtwin {

/// Column-major learner input. NaN marks an absent value.
struct DataMatrix {
  std::size_t rows = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  std::size_t n_cols() const { return cols.size(); }
  double at(std::size_t r, std::size_t c) const { return cols[c][r]; }
  /// Throws SchemaError.
  std::size_t index_of(std::string_view name) const;
  /// Copy restricted to the given rows (in the given order).
  DataMatrix select_rows(std::span<const std::size_t> rows) const;
  /// Throws SchemaError when shapes disagree.
  void validate() const;
};

struct GbdtConfig {
  int n_trees = 200;
  double learning_rate = 0.05;
  int max_leaves = 31;
  int min_samples_leaf = 20;
  double feature_fraction = 1.0;
  double bagging_fraction = 1.0;
  int n_bins = 63;
  std::uint64_t seed = 0;
  std::string loss = "squared_error";

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const GbdtConfig&) const = default;
};

struct TreeNode {
  /// Split feature (manifest index); -1 marks a leaf.
  std::int32_t feature = -1;
  /// Rows with x <= threshold go left; absent values follow default_left.
  double threshold = 0.0;
  bool default_left = true;
  std::int32_t left = -1;
  std::int32_t right = -1;
  /// Leaf output before learning-rate scaling.
  double value = 0.0;
  /// Squared-error gain of the split.
  double gain = 0.0;

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  bool operator==(const Tree&) const = default;
};

class GbdtModel {
 public:
  GbdtModel() = default;
  GbdtModel(std::vector<std::string> manifest, GbdtConfig cfg, double base_score)
      : manifest_(std::move(manifest)), config_(std::move(cfg)), base_score_(base_score) {}

  /// base_score + learning_rate * sum of leaf values; row in manifest order.
  double predict_row(std::span<const double> row) const;
  /// Maps X's columns onto the manifest by name. Throws SchemaError when X
  /// lacks a manifest column or carries one the model does not know.
  std::vector<double> predict(const DataMatrix& x) const;
  /// Total split gain per feature, normalized to sum 1. Empty for 0 splits.
  std::map<std::string, double> feature_importance() const;

  const std::vector<std::string>& manifest() const { return manifest_; }
  const GbdtConfig& config() const { return config_; }
  double base_score() const { return base_score_; }
  const std::vector<Tree>& trees() const { return trees_; }
  void add_tree(Tree t) { trees_.push_back(std::move(t)); }

  bool operator==(const GbdtModel&) const = default;

 private:
  std::vector<std::string> manifest_;
  GbdtConfig config_;
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
};

/// Histogram gradient boosting with squared-error loss. Rows whose label is
/// NaN are excluded. Leaf-wise growth on quantile bins with a dedicated
/// missing bin whose direction is learned per split; leaf values are refit on
/// all training rows. Throws TrainingError when too few labeled rows remain.
GbdtModel gbdt_fit(const DataMatrix& x, std::span<const double> y, const GbdtConfig& cfg);

inline constexpr std::string_view kGbdtMagic = "TWINGBDT v1";
void write_gbdt(std::ostream& out, const GbdtModel& m);
GbdtModel read_gbdt(std::istream& in);
/// Body without the magic line; used inside bundle containers.
class BinaryWriter;
class BinaryReader;
void write_gbdt_body(BinaryWriter& w, const GbdtModel& m);
GbdtModel read_gbdt_body(BinaryReader& r);
void write_gbdt_file(const std::filesystem::path& path, const GbdtModel& m);
GbdtModel read_gbdt_file(const std::filesystem::path& path);

}  // namespace herdtwin
