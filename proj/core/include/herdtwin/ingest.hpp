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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "herdtwin/timeseries.hpp"

namespace herdtwin {

/// One line of a raw sensor file, before timezone normalization.
struct RawRecord {
  std::optional<CowId> cow;  // absent for station files
  ModalityId modality = ModalityId::cbt;
  std::string local_time;  // ISO-8601 without zone
  int tz_offset_minutes = 0;
  std::vector<double> values;
};

/// A record whose timestamp has been converted to UTC seconds.
struct UtcRecord {
  std::optional<CowId> cow;
  ModalityId modality = ModalityId::cbt;
  std::int64_t utc_seconds = 0;
  std::vector<double> values;
};

enum class Aggregation { mean, last, max };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

struct IngestConfig {
  /// Gaps strictly shorter than this are linearly filled at 1-second resolution.
  int max_gap_seconds = 60;
  int step_minutes = 1;
  std::map<ModalityId, Aggregation> aggregation = default_aggregation();

  static std::map<ModalityId, Aggregation> default_aggregation();
  Aggregation aggregation_for(ModalityId m) const;
  /// Throws ConfigError.
  void validate() const;
};

struct ParseReport {
  std::vector<RawRecord> records;
  std::size_t total_lines = 0;
  /// 1-based line numbers (header is line 1).
  std::vector<std::size_t> malformed_lines;
};

/// Fraction of malformed data lines above which a file is rejected.
inline constexpr double kMaxMalformedFraction = 0.10;

/// Reads `cow_id,timestamp,tz_offset_min,v1[,v2,...]` (station files omit
/// cow_id). Malformed lines are reported; more than 10% malformed raises
/// FormatError listing them. Unreadable files raise IoError.
ParseReport parse_sensor_file(const std::filesystem::path& path, ModalityId modality);
ParseReport parse_sensor_stream(std::istream& in, ModalityId modality, std::string_view source = "<stream>");

/// Writes records in the raw sensor file format (values in shortest round-trip form).
void write_sensor_stream(std::ostream& out, ModalityId modality, bool station, std::span<const RawRecord> records);
void write_sensor_file(const std::filesystem::path& path, ModalityId modality, bool station,
                       std::span<const RawRecord> records);

/// Seconds since the epoch of a zone-less ISO-8601 timestamp
/// (`YYYY-MM-DDTHH:MM:SS`, `T` or space separator). Throws FormatError.
std::int64_t parse_iso_seconds(std::string_view text);
/// Inverse of parse_iso_seconds.
std::string format_iso_seconds(std::int64_t seconds);

/// t_utc = local_time - tz_offset. Order within the input is preserved.
std::vector<UtcRecord> normalize_timestamps(std::span<const RawRecord> records);

/// One (cow, modality) stream on the step grid.
struct ResampledStream {
  std::optional<CowId> cow;
  ModalityId modality = ModalityId::cbt;
  Timestamp start;
  std::vector<Series> channels;

  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// Bins records per (cow, modality) onto the step grid. Gaps shorter than
/// max_gap_seconds are filled linearly at 1 s resolution, but only between two
/// samples of the same bin so a bin never depends on later samples. Bins with no
/// raw sample stay absent.
std::vector<ResampledStream> resample_interpolate(std::span<const UtcRecord> records, const IngestConfig& cfg);

/// One frame per cow. Station modalities (thi, weather) are broadcast, milk is
/// held from its record time to the end of that UTC day, and sensor modalities
/// without data appear as fully missing.
std::vector<AlignedFrame> group_and_frame(std::span<const ResampledStream> streams, int step_minutes = 1);

struct IngestReport {
  std::map<ModalityId, std::size_t> records;
  std::map<ModalityId, std::vector<std::size_t>> malformed_lines;
};

/// Reads every `<modality>.csv` found in `dir` (or `dir/raw`) and returns one
/// aligned frame per cow, ordered by cow id.
std::vector<AlignedFrame> ingest_directory(const std::filesystem::path& dir, const IngestConfig& cfg,
                                           IngestReport* report = nullptr);

/// Full in-memory path used by tests and the simulator: normalize, resample, frame.
std::vector<AlignedFrame> ingest_records(std::span<const RawRecord> records, const IngestConfig& cfg);

}  // namespace herdtwin
