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

#include "herdtwin/timeseries.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "herdtwin/errors.hpp"

namespace herdtwin {

namespace {

constexpr std::int64_t kMinutesPerDay = 1440;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct Schema {
  ModalityId id;
  std::string_view name;
  std::vector<std::string_view> channels;
  std::vector<std::string_view> units;
};

const std::vector<Schema>& schemas() {
  static const std::vector<Schema> table = {
      {ModalityId::uwb, "uwb", {"x", "y", "z"}, {"m", "m", "m"}},
      {ModalityId::immu,
       "immu",
       {"acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z"},
       {"m/s^2", "m/s^2", "m/s^2", "rad/s", "rad/s", "rad/s"}},
      {ModalityId::pressure, "pressure", {"pressure"}, {"hPa"}},
      {ModalityId::cbt, "cbt", {"cbt"}, {"degC"}},
      {ModalityId::ankle, "ankle", {"tilt"}, {"code"}},
      {ModalityId::thi, "thi", {"thi"}, {"index"}},
      {ModalityId::weather,
       "weather",
       {"air_temp", "rel_humidity", "wind_speed", "solar_radiation", "precipitation"},
       {"degC", "%", "m/s", "W/m^2", "mm"}},
      {ModalityId::milk, "milk", {"milk_yield"}, {"kg"}},
      {ModalityId::dt_features,
       "dt_features",
       {"dt_cbt_prediction", "dt_future_cbt", "dt_stress_probability", "dt_p_lying", "dt_p_standing",
        "dt_p_walking", "dt_p_feeding", "dt_uncertainty"},
       {"degC", "degC", "prob", "prob", "prob", "prob", "prob", "degC"}},
      {ModalityId::global_time,
       "global_time",
       {"sin_hour", "cos_hour", "day_of_week"},
       {"unit", "unit", "day"}},
  };
  return table;
}

const Schema& schema(ModalityId m) {
  for (const auto& s : schemas())
    if (s.id == m) return s;
  throw std::logic_error("unknown modality id");
}

}  // namespace

double Timestamp::hour_of_day() const {
  const std::int64_t minute_of_day = epoch_minutes - floor_div(epoch_minutes, kMinutesPerDay) * kMinutesPerDay;
  return static_cast<double>(minute_of_day) / 60.0;
}

int Timestamp::day_of_week() const {
  // 1970-01-01 was a Thursday (Monday = 0 -> Thursday = 3).
  const std::int64_t days = floor_div(epoch_minutes, kMinutesPerDay);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

std::int64_t Timestamp::day_start() const { return floor_div(epoch_minutes, kMinutesPerDay) * kMinutesPerDay; }

std::string Timestamp::iso() const {
  using namespace std::chrono;
  const sys_days day{days{floor_div(epoch_minutes, kMinutesPerDay)}};
  const year_month_day ymd{day};
  const std::int64_t mod = epoch_minutes - day_start();
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:00", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), mod / 60, mod % 60);
}

CowId::CowId(std::string id) : id_(std::move(id)) {
  if (id_.empty()) throw IdentityError("cow id must be non-empty");
}

std::string_view to_string(ModalityId m) { return schema(m).name; }

ModalityId modality_from_string(std::string_view name) {
  for (const auto& s : schemas())
    if (s.name == name) return s.id;
  throw FormatError(fmt::format("unknown modality '{}'", name));
}

std::size_t channel_count(ModalityId m) { return schema(m).channels.size(); }

std::span<const std::string_view> channel_names(ModalityId m) { return schema(m).channels; }

std::span<const std::string_view> channel_units(ModalityId m) { return schema(m).units; }

bool is_station_modality(ModalityId m) { return m == ModalityId::thi || m == ModalityId::weather; }

void Series::set(std::size_t i, double v) {
  if (std::isnan(v)) throw NumericalError("NaN cannot be stored in a Series; use clear()");
  values_[i] = v;
  present_[i] = 1;
}

void Series::push_back(std::optional<double> v) {
  if (v && std::isnan(*v)) throw std::invalid_argument("NaN cannot be stored in a Series");
  values_.push_back(v.value_or(0.0));
  present_.push_back(v ? 1 : 0);
}

std::size_t Series::count_present() const {
  return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), std::uint8_t{1}));
}

Series Series::slice(std::size_t begin, std::size_t len) const {
  if (begin > size() || len > size() - begin)
    throw BoundsError(fmt::format("slice [{}, {}) outside series of length {}", begin, begin + len, size()));
  Series out;
  out.values_.assign(values_.begin() + static_cast<std::ptrdiff_t>(begin),
                     values_.begin() + static_cast<std::ptrdiff_t>(begin + len));
  out.present_.assign(present_.begin() + static_cast<std::ptrdiff_t>(begin),
                      present_.begin() + static_cast<std::ptrdiff_t>(begin + len));
  return out;
}

ModalityBlock make_block(std::vector<Channel> channels, std::size_t length) {
  ModalityBlock block;
  block.missing.assign(length, 1);
  block.time_since_obs.assign(length, 0);
  for (const auto& ch : channels) {
    if (ch.values.size() != length)
      throw SchemaError(fmt::format("channel '{}' has length {} but frame length is {}", ch.name,
                                    ch.values.size(), length));
    for (std::size_t t = 0; t < length; ++t)
      if (ch.values.has(t)) block.missing[t] = 0;
  }
  // Before the first observation the counter runs from the frame start.
  std::int64_t since = 0;
  for (std::size_t t = 0; t < length; ++t) {
    since = block.missing[t] ? since + 1 : 0;
    block.time_since_obs[t] = since;
  }
  block.channels = std::move(channels);
  return block;
}

AlignedFrame AlignedFrame::build(CowId cow, Timestamp start, std::size_t length,
                                 std::map<ModalityId, std::vector<Channel>> channels, int step_minutes) {
  if (step_minutes < 1) throw ResolutionError("step_minutes must be >= 1");
  AlignedFrame frame(std::move(cow), start, length, step_minutes);
  for (auto& [m, chs] : channels) frame.blocks_.emplace(m, make_block(std::move(chs), length));
  return frame;
}

AlignedFrame AlignedFrame::restore(CowId cow, Timestamp start, std::size_t length, int step_minutes,
                                   std::map<ModalityId, ModalityBlock> blocks) {
  if (step_minutes < 1) throw ResolutionError("step_minutes must be >= 1");
  for (const auto& [m, b] : blocks) {
    if (b.missing.size() != length || b.time_since_obs.size() != length)
      throw SchemaError(fmt::format("indicator length mismatch for modality {}", to_string(m)));
    for (const auto& ch : b.channels)
      if (ch.values.size() != length) throw SchemaError(fmt::format("channel '{}' length mismatch", ch.name));
    for (std::size_t t = 0; t < length; ++t) {
      bool any = false;
      for (const auto& ch : b.channels) any = any || ch.values.has(t);
      if (static_cast<bool>(b.missing[t]) == any)
        throw SchemaError(fmt::format("missing flag inconsistent with channels for {} at step {}", to_string(m), t));
      if ((b.time_since_obs[t] == 0) != any || b.time_since_obs[t] < 0)
        throw SchemaError(fmt::format("time_since_obs inconsistent for {} at step {}", to_string(m), t));
    }
  }
  AlignedFrame frame(std::move(cow), start, length, step_minutes);
  frame.blocks_ = std::move(blocks);
  return frame;
}

std::optional<std::size_t> AlignedFrame::index_of(Timestamp t) const {
  const std::int64_t d = t - start_;
  if (d < 0 || d % step_minutes_ != 0) return std::nullopt;
  const std::int64_t i = d / step_minutes_;
  if (i >= static_cast<std::int64_t>(length_)) return std::nullopt;
  return static_cast<std::size_t>(i);
}

const ModalityBlock& AlignedFrame::block(ModalityId m) const {
  auto it = blocks_.find(m);
  if (it == blocks_.end())
    throw SchemaError(fmt::format("frame for cow {} has no modality '{}'", cow_.str(), to_string(m)));
  return it->second;
}

const Series& AlignedFrame::channel(ModalityId m, std::string_view name) const {
  for (const auto& ch : block(m).channels)
    if (ch.name == name) return ch.values;
  throw SchemaError(fmt::format("modality '{}' has no channel '{}'", to_string(m), name));
}

AlignedFrame AlignedFrame::with_modalities(std::map<ModalityId, std::vector<Channel>> extra) const {
  AlignedFrame copy = *this;
  for (auto& [m, chs] : extra) copy.blocks_[m] = make_block(std::move(chs), length_);
  return copy;
}

AlignedFrame slice_window(const AlignedFrame& frame, Timestamp t_end, std::size_t len) {
  const auto end_idx = frame.index_of(t_end);
  if (!end_idx)
    throw BoundsError(fmt::format("window end {} is outside frame [{}, {}]", t_end.iso(), frame.start().iso(),
                                  frame.end().iso()));
  if (len == 0) throw BoundsError("window length must be positive");
  if (len > *end_idx + 1) {
    const Timestamp first = t_end - (static_cast<std::int64_t>(len) - 1) * frame.step_minutes();
    throw BoundsError(fmt::format("window start {} precedes frame start {}", first.iso(), frame.start().iso()));
  }
  const std::size_t begin = *end_idx + 1 - len;
  std::map<ModalityId, ModalityBlock> blocks;
  for (const auto& [m, b] : frame.blocks()) {
    ModalityBlock nb;
    for (const auto& ch : b.channels) nb.channels.push_back({ch.name, ch.unit, ch.values.slice(begin, len)});
    nb.missing.assign(b.missing.begin() + static_cast<std::ptrdiff_t>(begin),
                      b.missing.begin() + static_cast<std::ptrdiff_t>(begin + len));
    nb.time_since_obs.assign(b.time_since_obs.begin() + static_cast<std::ptrdiff_t>(begin),
                             b.time_since_obs.begin() + static_cast<std::ptrdiff_t>(begin + len));
    blocks.emplace(m, std::move(nb));
  }
  return AlignedFrame::restore(frame.cow(), frame.time_at(begin), len, frame.step_minutes(), std::move(blocks));
}

AlignedFrame merge_frames(std::span<const AlignedFrame> frames, MergeStats* stats) {
  if (frames.empty()) throw SchemaError("merge_frames needs at least one frame");
  const AlignedFrame& first = frames.front();
  Timestamp lo = first.start();
  Timestamp hi = first.end();
  for (const auto& f : frames) {
    if (f.cow() != first.cow())
      throw IdentityError(fmt::format("cannot merge frames of cows '{}' and '{}'", first.cow().str(), f.cow().str()));
    if (f.step_minutes() != first.step_minutes())
      throw ResolutionError(fmt::format("cannot merge step {} with step {}", first.step_minutes(), f.step_minutes()));
    lo = std::min(lo, f.start());
    hi = std::max(hi, f.end());
  }
  const std::int64_t step = first.step_minutes();
  for (const auto& f : frames)
    if ((f.start() - lo) % step != 0) throw ResolutionError("frames are not aligned to a common grid");
  const auto length = static_cast<std::size_t>((hi - lo) / step + 1);

  std::map<ModalityId, std::vector<Channel>> merged;
  std::size_t overwritten = 0;
  for (const auto& f : frames) {
    const auto offset = static_cast<std::size_t>((f.start() - lo) / step);
    for (const auto& [m, b] : f.blocks()) {
      auto& target = merged[m];
      if (target.empty())
        for (const auto& ch : b.channels) target.push_back({ch.name, ch.unit, Series(length)});
      if (target.size() != b.channels.size())
        throw SchemaError(fmt::format("channel count mismatch while merging modality {}", to_string(m)));
      for (std::size_t c = 0; c < b.channels.size(); ++c) {
        const Series& src = b.channels[c].values;
        Series& dst = target[c].values;
        for (std::size_t t = 0; t < f.length(); ++t) {
          if (!src.has(t)) continue;
          if (dst.has(offset + t) && dst.value(offset + t) != src.value(t)) ++overwritten;
          dst.set(offset + t, src.value(t));
        }
      }
    }
  }
  if (overwritten > 0) spdlog::warn("merge_frames: {} overlapping values overwritten (last write wins)", overwritten);
  if (stats) stats->overwritten = overwritten;
  return AlignedFrame::build(first.cow(), lo, length, std::move(merged), first.step_minutes());
}

}  // namespace herdtwin
