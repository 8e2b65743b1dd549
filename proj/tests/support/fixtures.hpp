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

#include <herdtwin/synth.hpp>
#include <herdtwin/timeseries.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace herdtwin::testing {

inline Series series_of(const std::vector<std::optional<double>>& v) {
  Series s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s.set(i, v[i]);
  return s;
}

/// Channel list for modality m with every channel absent.
inline std::vector<Channel> empty_channels(ModalityId m, std::size_t n) {
  std::vector<Channel> out;
  const auto names = channel_names(m);
  const auto units = channel_units(m);
  for (std::size_t c = 0; c < names.size(); ++c) out.push_back({std::string(names[c]), std::string(units[c]), Series(n)});
  return out;
}

/// A frame carrying only CBT and THI, both fully observed.
inline AlignedFrame cbt_thi_frame(const std::vector<double>& cbt, const std::vector<double>& thi,
                                  Timestamp start = Timestamp{28'622'880}) {
  std::map<ModalityId, std::vector<Channel>> chs;
  auto c = empty_channels(ModalityId::cbt, cbt.size());
  for (std::size_t i = 0; i < cbt.size(); ++i) c[0].values.set(i, cbt[i]);
  auto t = empty_channels(ModalityId::thi, thi.size());
  for (std::size_t i = 0; i < thi.size(); ++i) t[0].values.set(i, thi[i]);
  chs[ModalityId::cbt] = std::move(c);
  chs[ModalityId::thi] = std::move(t);
  return AlignedFrame::build(CowId("cow01"), start, cbt.size(), std::move(chs));
}

/// Small synthetic herd for fast tests.
inline SynthConfig small_herd(int cows = 3, int days = 1, std::uint64_t seed = 7) {
  SynthConfig cfg;
  cfg.n_cows = cows;
  cfg.days = days;
  cfg.seed = seed;
  return cfg;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("herdtwin_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace herdtwin::testing
