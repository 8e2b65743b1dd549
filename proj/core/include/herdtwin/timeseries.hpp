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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace herdtwin {

/// Whole minutes since 1970-01-01T00:00Z.
struct Timestamp {
  std::int64_t epoch_minutes{0};

  constexpr auto operator<=>(const Timestamp&) const = default;
  constexpr Timestamp operator+(std::int64_t minutes) const { return {epoch_minutes + minutes}; }
  constexpr Timestamp operator-(std::int64_t minutes) const { return {epoch_minutes - minutes}; }
  constexpr std::int64_t operator-(Timestamp other) const { return epoch_minutes - other.epoch_minutes; }

  /// Fractional hour of day in [0, 24).
  double hour_of_day() const;
  /// Monday = 0 ... Sunday = 6.
  int day_of_week() const;
  /// Epoch minute at which this timestamp's UTC day starts.
  std::int64_t day_start() const;
  /// "YYYY-MM-DDTHH:MM:00".
  std::string iso() const;
};

/// Opaque, non-empty animal identifier.
class CowId {
 public:
  explicit CowId(std::string id);
  const std::string& str() const { return id_; }
  auto operator<=>(const CowId&) const = default;

 private:
  std::string id_;
};

enum class ModalityId : std::uint8_t {
  uwb,
  immu,
  pressure,
  cbt,
  ankle,
  thi,
  weather,
  milk,
  dt_features,
  global_time,
};

inline constexpr std::array<ModalityId, 10> kAllModalities = {
    ModalityId::uwb,   ModalityId::immu,    ModalityId::pressure, ModalityId::cbt,         ModalityId::ankle,
    ModalityId::thi,   ModalityId::weather, ModalityId::milk,     ModalityId::dt_features, ModalityId::global_time,
};

/// The eight raw sensing modalities.
inline constexpr std::array<ModalityId, 8> kSensorModalities = {
    ModalityId::uwb, ModalityId::immu,    ModalityId::pressure, ModalityId::cbt,
    ModalityId::ankle, ModalityId::thi, ModalityId::weather, ModalityId::milk,
};

std::string_view to_string(ModalityId m);
/// Throws FormatError for unknown names.
ModalityId modality_from_string(std::string_view name);
/// Fixed channel count per modality.
std::size_t channel_count(ModalityId m);
/// Canonical channel names and units for a modality.
std::span<const std::string_view> channel_names(ModalityId m);
std::span<const std::string_view> channel_units(ModalityId m);
/// Station-level modalities carry no cow id and are broadcast to every cow.
bool is_station_modality(ModalityId m);

/// Fixed-length sequence of optional reals. Absence is explicit; NaN is rejected.
class Series {
 public:
  Series() = default;
  explicit Series(std::size_t n) : values_(n, 0.0), present_(n, 0) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  bool has(std::size_t i) const { return present_[i] != 0; }
  /// Value at i; only meaningful when has(i).
  double value(std::size_t i) const { return values_[i]; }
  std::optional<double> at(std::size_t i) const {
    return has(i) ? std::optional<double>(values_[i]) : std::nullopt;
  }
  /// Throws std::invalid_argument on NaN.
  void set(std::size_t i, double v);
  void set(std::size_t i, std::optional<double> v) {
    if (v) set(i, *v); else clear(i);
  }
  void clear(std::size_t i) {
    present_[i] = 0;
    values_[i] = 0.0;
  }
  void push_back(std::optional<double> v);
  std::size_t count_present() const;
  Series slice(std::size_t begin, std::size_t len) const;

  const std::vector<double>& raw_values() const { return values_; }
  const std::vector<std::uint8_t>& presence() const { return present_; }

  bool operator==(const Series&) const = default;

 private:
  std::vector<double> values_;
  std::vector<std::uint8_t> present_;
};

struct Channel {
  std::string name;
  std::string unit;
  Series values;

  bool operator==(const Channel&) const = default;
};

/// Channels of one modality plus its derived missingness indicators.
struct ModalityBlock {
  std::vector<Channel> channels;
  /// true iff every channel is absent at t.
  std::vector<std::uint8_t> missing;
  /// Minutes since the last step with any channel present; 0 exactly when present.
  std::vector<std::int64_t> time_since_obs;

  bool operator==(const ModalityBlock&) const = default;
};

/// Per-cow multimodal series on a 1-minute grid. Immutable after construction.
class AlignedFrame {
 public:
  /// Builds a frame and derives missing flags / time-since-observation.
  /// Every channel must have exactly `length` entries.
  static AlignedFrame build(CowId cow, Timestamp start, std::size_t length,
                            std::map<ModalityId, std::vector<Channel>> channels, int step_minutes = 1);
  /// Restores a frame with explicit indicator sequences (deserialization); validates invariants.
  static AlignedFrame restore(CowId cow, Timestamp start, std::size_t length, int step_minutes,
                              std::map<ModalityId, ModalityBlock> blocks);

  const CowId& cow() const { return cow_; }
  Timestamp start() const { return start_; }
  Timestamp end() const { return time_at(length_ - 1); }
  int step_minutes() const { return step_minutes_; }
  std::size_t length() const { return length_; }
  Timestamp time_at(std::size_t i) const { return start_ + static_cast<std::int64_t>(i) * step_minutes_; }
  /// Index of t in this frame, or nullopt when outside the span.
  std::optional<std::size_t> index_of(Timestamp t) const;

  bool has_modality(ModalityId m) const { return blocks_.contains(m); }
  /// Throws SchemaError when absent.
  const ModalityBlock& block(ModalityId m) const;
  const std::vector<Channel>& channels(ModalityId m) const { return block(m).channels; }
  /// Channel by canonical name; throws SchemaError when absent.
  const Series& channel(ModalityId m, std::string_view name) const;
  const std::map<ModalityId, ModalityBlock>& blocks() const { return blocks_; }
  /// Returns a copy of this frame with `extra` modalities added or replaced.
  AlignedFrame with_modalities(std::map<ModalityId, std::vector<Channel>> extra) const;

  bool operator==(const AlignedFrame&) const = default;

 private:
  AlignedFrame(CowId cow, Timestamp start, std::size_t length, int step)
      : cow_(std::move(cow)), start_(start), step_minutes_(step), length_(length) {}

  CowId cow_;
  Timestamp start_;
  int step_minutes_ = 1;
  std::size_t length_ = 0;
  std::map<ModalityId, ModalityBlock> blocks_;
};

/// Derives missing flags and time-since-observation from channel presence.
ModalityBlock make_block(std::vector<Channel> channels, std::size_t length);

/// Last `len` steps ending at t_end inclusive. Throws BoundsError naming the
/// offending timestamp when the window leaves the frame.
AlignedFrame slice_window(const AlignedFrame& frame, Timestamp t_end, std::size_t len);

struct MergeStats {
  /// Present values overwritten by a later frame.
  std::size_t overwritten = 0;
};

/// Union of modalities over the union of spans; a later frame's present values
/// win on overlap. Throws IdentityError / ResolutionError on mismatched inputs.
AlignedFrame merge_frames(std::span<const AlignedFrame> frames, MergeStats* stats = nullptr);

}  // namespace herdtwin
