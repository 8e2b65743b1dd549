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

#include "herdtwin/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "herdtwin/binary_io.hpp"
#include "herdtwin/errors.hpp"
#include "herdtwin/parallel.hpp"
#include "herdtwin/rng.hpp"

namespace herdtwin {

std::size_t DataMatrix::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw SchemaError(fmt::format("column '{}' not in matrix", name));
}

DataMatrix DataMatrix::select_rows(std::span<const std::size_t> idx) const {
  DataMatrix out;
  out.rows = idx.size();
  out.names = names;
  out.cols.resize(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    out.cols[c].reserve(idx.size());
    for (std::size_t r : idx) out.cols[c].push_back(cols[c][r]);
  }
  return out;
}

void DataMatrix::validate() const {
  if (names.size() != cols.size())
    throw SchemaError(fmt::format("{} names for {} columns", names.size(), cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    if (cols[c].size() != rows)
      throw SchemaError(fmt::format("column '{}' has {} rows, expected {}", names[c], cols[c].size(), rows));
}

void GbdtConfig::validate() const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must be in (0, 1]");
  if (max_leaves < 2) throw ConfigError("max_leaves must be >= 2");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) throw ConfigError("feature_fraction must be in (0, 1]");
  if (!(bagging_fraction > 0.0 && bagging_fraction <= 1.0)) throw ConfigError("bagging_fraction must be in (0, 1]");
  if (n_bins < 2 || n_bins > 255) throw ConfigError("n_bins must be in [2, 255]");
  if (loss != "squared_error") throw ConfigError(fmt::format("unsupported loss '{}'", loss));
}

double Tree::predict(std::span<const double> row) const {
  std::int32_t i = 0;
  for (;;) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature < 0) return n.value;
    const double x = row[static_cast<std::size_t>(n.feature)];
    const bool left = std::isnan(x) ? n.default_left : x <= n.threshold;
    i = left ? n.left : n.right;
  }
}

double GbdtModel::predict_row(std::span<const double> row) const {
  double s = 0.0;
  for (const Tree& t : trees_) s += t.predict(row);
  return base_score_ + config_.learning_rate * s;
}

std::vector<double> GbdtModel::predict(const DataMatrix& x) const {
  x.validate();
  if (x.n_cols() != manifest_.size()) {
    for (const auto& n : x.names)
      if (std::find(manifest_.begin(), manifest_.end(), n) == manifest_.end())
        throw SchemaError(fmt::format("feature '{}' is not in the model manifest", n));
  }
  std::vector<std::size_t> src(manifest_.size());
  for (std::size_t j = 0; j < manifest_.size(); ++j) src[j] = x.index_of(manifest_[j]);
  std::vector<double> out(x.rows);
  std::vector<double> row(manifest_.size());
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t j = 0; j < src.size(); ++j) row[j] = x.cols[src[j]][r];
    out[r] = predict_row(row);
  }
  return out;
}

std::map<std::string, double> GbdtModel::feature_importance() const {
  std::vector<double> g(manifest_.size(), 0.0);
  for (const Tree& t : trees_)
    for (const TreeNode& n : t.nodes)
      if (n.feature >= 0) g[static_cast<std::size_t>(n.feature)] += n.gain;
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  std::map<std::string, double> out;
  if (total <= 0.0) return out;
  for (std::size_t j = 0; j < g.size(); ++j) out[manifest_[j]] = g[j] / total;
  return out;
}

namespace {

constexpr double kMinGain = 1e-12;

struct BinnedFeature {
  std::vector<std::uint8_t> bin;  // per labeled row; n_real marks absent
  std::vector<double> cut;        // cut[k]: threshold between bin k and k+1
  int n_real = 0;
};

BinnedFeature bin_feature(const std::vector<double>& col, std::span<const std::size_t> rows, int n_bins) {
  BinnedFeature f;
  std::vector<double> v;
  v.reserve(rows.size());
  for (std::size_t r : rows)
    if (!std::isnan(col[r])) v.push_back(col[r]);
  std::sort(v.begin(), v.end());
  // Upper edges (inclusive) of each bin, taken from data values.
  std::vector<double> upper;
  std::vector<double> uniq;
  std::unique_copy(v.begin(), v.end(), std::back_inserter(uniq));
  if (static_cast<int>(uniq.size()) <= n_bins) {
    upper = uniq;
  } else {
    for (int b = 1; b <= n_bins; ++b) {
      const std::size_t idx = std::min(v.size() - 1, (v.size() * static_cast<std::size_t>(b)) / n_bins - 1);
      if (upper.empty() || v[idx] > upper.back()) upper.push_back(v[idx]);
    }
    if (upper.back() < v.back()) upper.back() = v.back();
  }
  f.n_real = static_cast<int>(upper.size());
  // Threshold between bin k and k+1: midpoint of the bin max and the next
  // observed value, kept strictly below the latter.
  for (std::size_t k = 0; k + 1 < upper.size(); ++k) {
    const double next = *std::upper_bound(v.begin(), v.end(), upper[k]);
    double mid = upper[k] + 0.5 * (next - upper[k]);
    if (!(mid < next)) mid = upper[k];
    f.cut.push_back(mid);
  }
  f.bin.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double x = col[rows[i]];
    if (std::isnan(x)) {
      f.bin[i] = static_cast<std::uint8_t>(f.n_real);
    } else {
      const auto it = std::lower_bound(f.cut.begin(), f.cut.end(), x);
      f.bin[i] = static_cast<std::uint8_t>(it - f.cut.begin());
    }
  }
  return f;
}

struct HistBin {
  double g = 0.0;
  std::uint32_t n = 0;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;  // left = bins <= bin; bin == n_real - 1 sends all present values left
  bool missing_left = true;
};

struct Leaf {
  std::size_t begin = 0, end = 0;
  std::int32_t node = 0;
  std::vector<HistBin> hist;  // concatenated per feature
  Split best;
};

class TreeGrower {
 public:
  TreeGrower(const std::vector<BinnedFeature>& feats, const GbdtConfig& cfg)
      : feats_(feats), cfg_(cfg), offset_(feats.size() + 1, 0) {
    for (std::size_t f = 0; f < feats.size(); ++f)
      offset_[f + 1] = offset_[f] + static_cast<std::size_t>(feats[f].n_real) + 1;
  }

  Tree grow(std::vector<std::uint32_t> rows, const std::vector<double>& grad, const std::vector<int>& active) {
    rows_ = std::move(rows);
    grad_ = &grad;
    active_ = &active;
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Leaf> leaves;
    Leaf root;
    root.begin = 0;
    root.end = rows_.size();
    root.node = 0;
    root.hist = build_hist(root.begin, root.end);
    root.best = find_split(root);
    leaves.push_back(std::move(root));

    while (static_cast<int>(leaves.size()) < cfg_.max_leaves) {
      std::size_t pick = leaves.size();
      double best = kMinGain;
      for (std::size_t i = 0; i < leaves.size(); ++i)
        if (leaves[i].best.feature >= 0 && leaves[i].best.gain > best) {
          best = leaves[i].best.gain;
          pick = i;
        }
      if (pick == leaves.size()) break;
      Leaf parent = std::move(leaves[pick]);
      const Split& s = parent.best;
      const BinnedFeature& bf = feats_[static_cast<std::size_t>(s.feature)];
      auto goes_left = [&](std::uint32_t r) {
        const int b = bf.bin[r];
        return b == bf.n_real ? s.missing_left : b <= s.bin;
      };
      const auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(parent.begin),
                                             rows_.begin() + static_cast<std::ptrdiff_t>(parent.end), goes_left);
      const std::size_t split_at = static_cast<std::size_t>(mid - rows_.begin());

      TreeNode& pn = tree.nodes[static_cast<std::size_t>(parent.node)];
      pn.feature = s.feature;
      pn.threshold = s.bin + 1 < bf.n_real ? bf.cut[static_cast<std::size_t>(s.bin)]
                                           : std::numeric_limits<double>::infinity();
      pn.default_left = s.missing_left;
      pn.gain = s.gain;
      pn.left = static_cast<std::int32_t>(tree.nodes.size());
      pn.right = pn.left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();

      Leaf l, r;
      l.begin = parent.begin;
      l.end = split_at;
      l.node = tree.nodes[static_cast<std::size_t>(parent.node)].left;
      r.begin = split_at;
      r.end = parent.end;
      r.node = l.node + 1;
      Leaf& small = (l.end - l.begin) <= (r.end - r.begin) ? l : r;
      Leaf& large = &small == &l ? r : l;
      small.hist = build_hist(small.begin, small.end);
      large.hist = std::move(parent.hist);
      for (std::size_t k = 0; k < large.hist.size(); ++k) {
        large.hist[k].g -= small.hist[k].g;
        large.hist[k].n -= small.hist[k].n;
      }
      l.best = find_split(l);
      r.best = find_split(r);
      leaves[pick] = std::move(l);
      leaves.push_back(std::move(r));
    }
    return tree;
  }

 private:
  std::vector<HistBin> build_hist(std::size_t begin, std::size_t end) const {
    std::vector<HistBin> h(offset_.back());
    const auto& g = *grad_;
    const auto& act = *active_;
    parallel_for(act.size(), [&](std::size_t a) {
      const auto f = static_cast<std::size_t>(act[a]);
      HistBin* base = h.data() + offset_[f];
      const auto& bins = feats_[f].bin;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t r = rows_[i];
        HistBin& b = base[bins[r]];
        b.g += g[r];
        ++b.n;
      }
    });
    return h;
  }

  Split find_split(const Leaf& leaf) const {
    Split best;
    const std::size_t n_rows = leaf.end - leaf.begin;
    const auto msl = static_cast<std::size_t>(cfg_.min_samples_leaf);
    if (n_rows < 2 * msl) return best;
    for (int fi : *active_) {
      const auto f = static_cast<std::size_t>(fi);
      const BinnedFeature& bf = feats_[f];
      const HistBin* h = leaf.hist.data() + offset_[f];
      double G = 0.0;
      std::size_t N = 0;
      for (int b = 0; b <= bf.n_real; ++b) {
        G += h[b].g;
        N += h[b].n;
      }
      const HistBin miss = h[bf.n_real];
      const double parent_score = G * G / static_cast<double>(N);
      for (int dir = 0; dir < 2; ++dir) {
        const bool missing_left = dir == 0;
        double gl = missing_left ? miss.g : 0.0;
        std::size_t nl = missing_left ? miss.n : 0;
        const int last = missing_left ? bf.n_real - 1 : bf.n_real;
        for (int b = 0; b < last; ++b) {
          gl += h[b].g;
          nl += h[b].n;
          if (b == bf.n_real - 1 && miss.n == 0) break;
          const std::size_t nr = N - nl;
          if (nl < msl || nr < msl) continue;
          const double gr = G - gl;
          const double gain =
              gl * gl / static_cast<double>(nl) + gr * gr / static_cast<double>(nr) - parent_score;
          if (gain > best.gain) best = Split{gain, fi, b, missing_left};
        }
      }
    }
    if (best.gain <= kMinGain) best.feature = -1;
    return best;
  }

  const std::vector<BinnedFeature>& feats_;
  const GbdtConfig& cfg_;
  std::vector<std::size_t> offset_;
  std::vector<std::uint32_t> rows_;
  const std::vector<double>* grad_ = nullptr;
  const std::vector<int>* active_ = nullptr;
};

}  // namespace

GbdtModel gbdt_fit(const DataMatrix& x, std::span<const double> y, const GbdtConfig& cfg) {
  cfg.validate();
  x.validate();
  if (y.size() != x.rows)
    throw SchemaError(fmt::format("{} labels for {} rows", y.size(), x.rows));
  std::vector<std::size_t> lab;
  for (std::size_t r = 0; r < x.rows; ++r)
    if (std::isfinite(y[r])) lab.push_back(r);
  if (lab.size() < 2 * static_cast<std::size_t>(cfg.min_samples_leaf))
    throw TrainingError(fmt::format("{} labeled rows; need at least {}", lab.size(), 2 * cfg.min_samples_leaf));
  if (lab.size() > std::numeric_limits<std::uint32_t>::max()) throw TrainingError("too many rows");

  const std::size_t n = lab.size();
  const std::size_t n_feat = x.n_cols();
  std::vector<BinnedFeature> feats(n_feat);
  parallel_for(n_feat, [&](std::size_t f) { feats[f] = bin_feature(x.cols[f], lab, cfg.n_bins); });

  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = y[lab[i]];
  const double first = target.front();
  const bool constant = std::all_of(target.begin(), target.end(), [&](double v) { return v == first; });
  const double base = constant ? first : std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);

  GbdtModel model(x.names, cfg, base);
  std::vector<double> pred(n, base);
  std::vector<double> grad(n);
  std::vector<std::vector<double>> rows_major(n, std::vector<double>(n_feat));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < n_feat; ++f) rows_major[i][f] = x.cols[f][lab[i]];

  TreeGrower grower(feats, cfg);
  const auto n_active = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.feature_fraction * static_cast<double>(n_feat))));
  const auto n_bag = std::max<std::size_t>(
      2 * static_cast<std::size_t>(cfg.min_samples_leaf),
      static_cast<std::size_t>(std::llround(cfg.bagging_fraction * static_cast<double>(n))));

  std::vector<int> all_features(n_feat);
  std::iota(all_features.begin(), all_features.end(), 0);
  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0u);

  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = target[i] - pred[i];

    std::vector<int> active = all_features;
    if (n_active < n_feat) {
      Rng rng = make_rng(cfg.seed, {1, static_cast<std::uint64_t>(t)});
      for (std::size_t i = 0; i < n_active; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n_feat - i));
        std::swap(active[i], active[j]);
      }
      active.resize(n_active);
      std::sort(active.begin(), active.end());
    }
    std::vector<std::uint32_t> bag = all_rows;
    if (n_bag < n) {
      Rng rng = make_rng(cfg.seed, {2, static_cast<std::uint64_t>(t)});
      for (std::size_t i = 0; i < n_bag; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - i));
        std::swap(bag[i], bag[j]);
      }
      bag.resize(n_bag);
      std::sort(bag.begin(), bag.end());
    }

    Tree tree = grower.grow(std::move(bag), grad, active);

    // Refit every leaf to the mean residual of all training rows routed to it.
    std::vector<std::int32_t> leaf_of(n);
    std::vector<double> sum(tree.nodes.size(), 0.0);
    std::vector<std::size_t> cnt(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t k = 0;
      while (tree.nodes[static_cast<std::size_t>(k)].feature >= 0) {
        const TreeNode& nd = tree.nodes[static_cast<std::size_t>(k)];
        const double v = rows_major[i][static_cast<std::size_t>(nd.feature)];
        k = (std::isnan(v) ? nd.default_left : v <= nd.threshold) ? nd.left : nd.right;
      }
      leaf_of[i] = k;
      sum[static_cast<std::size_t>(k)] += grad[i];
      ++cnt[static_cast<std::size_t>(k)];
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
      if (tree.nodes[k].feature < 0) tree.nodes[k].value = cnt[k] ? sum[k] / static_cast<double>(cnt[k]) : 0.0;
    for (std::size_t i = 0; i < n; ++i)
      pred[i] += cfg.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
    model.add_tree(std::move(tree));
  }
  return model;
}

void write_gbdt_body(BinaryWriter& w, const GbdtModel& m) {
  const GbdtConfig& c = m.config();
  w.u32(static_cast<std::uint32_t>(c.n_trees));
  w.f64(c.learning_rate);
  w.u32(static_cast<std::uint32_t>(c.max_leaves));
  w.u32(static_cast<std::uint32_t>(c.min_samples_leaf));
  w.f64(c.feature_fraction);
  w.f64(c.bagging_fraction);
  w.u32(static_cast<std::uint32_t>(c.n_bins));
  w.u64(c.seed);
  w.str(c.loss);
  w.f64(m.base_score());
  w.u64(m.manifest().size());
  for (const auto& s : m.manifest()) w.str(s);
  w.u64(m.trees().size());
  for (const Tree& t : m.trees()) {
    w.u64(t.nodes.size());
    for (const TreeNode& nd : t.nodes) {
      w.u32(static_cast<std::uint32_t>(nd.feature));
      w.f64(nd.threshold);
      w.u8(nd.default_left ? 1 : 0);
      w.u32(static_cast<std::uint32_t>(nd.left));
      w.u32(static_cast<std::uint32_t>(nd.right));
      w.f64(nd.value);
      w.f64(nd.gain);
    }
  }
}

GbdtModel read_gbdt_body(BinaryReader& r) {
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
  const double base = r.f64();
  const std::uint64_t n_feat = r.u64();
  if (n_feat > (1u << 20)) throw FormatError("corrupt manifest length");
  std::vector<std::string> manifest;
  for (std::uint64_t i = 0; i < n_feat; ++i) manifest.push_back(r.str());
  GbdtModel m(std::move(manifest), c, base);
  const std::uint64_t n_trees = r.u64();
  if (n_trees > (1u << 24)) throw FormatError("corrupt tree count");
  for (std::uint64_t t = 0; t < n_trees; ++t) {
    Tree tree;
    const std::uint64_t n_nodes = r.u64();
    if (n_nodes > (1u << 24)) throw FormatError("corrupt node count");
    tree.nodes.resize(n_nodes);
    for (TreeNode& nd : tree.nodes) {
      nd.feature = static_cast<std::int32_t>(r.u32());
      nd.threshold = r.f64();
      nd.default_left = r.u8() != 0;
      nd.left = static_cast<std::int32_t>(r.u32());
      nd.right = static_cast<std::int32_t>(r.u32());
      nd.value = r.f64();
      nd.gain = r.f64();
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      const TreeNode& nd = tree.nodes[k];
      if (nd.feature >= static_cast<std::int32_t>(n_feat) ||
          (nd.feature >= 0 && (nd.left <= static_cast<std::int32_t>(k) || nd.right <= static_cast<std::int32_t>(k) ||
                               nd.left >= static_cast<std::int32_t>(n_nodes) ||
                               nd.right >= static_cast<std::int32_t>(n_nodes))))
        throw FormatError("corrupt tree node");
    }
    m.add_tree(std::move(tree));
  }
  return m;
}

void write_gbdt(std::ostream& out, const GbdtModel& m) {
  out << kGbdtMagic << '\n';
  BinaryWriter w(out);
  write_gbdt_body(w, m);
}

GbdtModel read_gbdt(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic)) throw FormatError("empty model file");
  if (magic != kGbdtMagic) throw VersionError(std::string(kGbdtMagic), magic);
  BinaryReader r(in);
  return read_gbdt_body(r);
}

void write_gbdt_file(const std::filesystem::path& path, const GbdtModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_gbdt(out, m);
}

GbdtModel read_gbdt_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_gbdt(in);
}

}  // namespace herdtwin
