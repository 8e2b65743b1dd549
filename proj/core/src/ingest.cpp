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

#include "herdtwin/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "herdtwin/errors.hpp"
#include "herdtwin/parallel.hpp"

namespace herdtwin {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_int_field(std::string_view s, std::size_t len, int& out) {
  if (s.size() != len) return false;
  return parse_number(s, out);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct StreamKey {
  std::optional<CowId> cow;
  ModalityId modality;
  auto operator<=>(const StreamKey&) const = default;
};

}  // namespace

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::last: return "last";
    case Aggregation::max: return "max";
  }
  return "mean";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "last") return Aggregation::last;
  if (s == "max") return Aggregation::max;
  throw ConfigError(fmt::format("unknown aggregation '{}' (expected mean, last or max)", s));
}

std::map<ModalityId, Aggregation> IngestConfig::default_aggregation() {
  std::map<ModalityId, Aggregation> m;
  for (ModalityId id : kSensorModalities) m[id] = Aggregation::mean;
  m[ModalityId::ankle] = Aggregation::last;
  m[ModalityId::milk] = Aggregation::last;
  return m;
}

Aggregation IngestConfig::aggregation_for(ModalityId m) const {
  auto it = aggregation.find(m);
  return it == aggregation.end() ? Aggregation::mean : it->second;
}

void IngestConfig::validate() const {
  if (max_gap_seconds <= 0) throw ConfigError("ingest.max_gap_seconds must be > 0");
  if (step_minutes < 1) throw ConfigError("ingest.step_minutes must be >= 1");
}

std::int64_t parse_iso_seconds(std::string_view text) {
  const std::string_view s = trim(text);
  // YYYY-MM-DDTHH:MM[:SS]
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  const bool ok = s.size() >= 16 && s[4] == '-' && s[7] == '-' && (s[10] == 'T' || s[10] == ' ') && s[13] == ':' &&
                  parse_int_field(s.substr(0, 4), 4, y) && parse_int_field(s.substr(5, 2), 2, mo) &&
                  parse_int_field(s.substr(8, 2), 2, d) && parse_int_field(s.substr(11, 2), 2, h) &&
                  parse_int_field(s.substr(14, 2), 2, mi) &&
                  (s.size() == 16 || (s.size() == 19 && s[16] == ':' && parse_int_field(s.substr(17, 2), 2, sec)));
  if (!ok || h > 23 || mi > 59 || sec > 59) throw FormatError(fmt::format("unparseable timestamp '{}'", text));
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw FormatError(fmt::format("invalid calendar date in '{}'", text));
  const std::int64_t days_since = sys_days{ymd}.time_since_epoch().count();
  return days_since * 86400 + h * 3600 + mi * 60 + sec;
}

std::string format_iso_seconds(std::int64_t seconds) {
  using namespace std::chrono;
  const std::int64_t days_since = floor_div(seconds, 86400);
  const std::int64_t rem = seconds - days_since * 86400;
  const year_month_day ymd{sys_days{days{days_since}}};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600,
                     (rem / 60) % 60, rem % 60);
}

ParseReport parse_sensor_stream(std::istream& in, ModalityId modality, std::string_view source) {
  ParseReport report;
  const std::size_t nch = channel_count(modality);
  std::string line;
  std::size_t line_no = 0;
  bool has_cow = true;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (!header_seen) {
      if (view.empty()) continue;
      header_seen = true;
      const auto cols = split_csv(view);
      has_cow = trim(cols.front()) == "cow_id";
      const std::size_t expected = nch + (has_cow ? 3 : 2);
      if (cols.size() != expected)
        throw FormatError(fmt::format("{}: header has {} columns, expected {} for modality {}", source, cols.size(),
                                      expected, to_string(modality)));
      continue;
    }
    if (view.empty()) continue;
    ++report.total_lines;
    const auto cols = split_csv(view);
    const std::size_t off = has_cow ? 1 : 0;
    RawRecord rec;
    rec.modality = modality;
    bool ok = cols.size() == nch + 2 + off;
    if (ok && has_cow) {
      const auto id = trim(cols[0]);
      ok = !id.empty();
      if (ok) rec.cow = CowId(std::string(id));
    }
    if (ok) {
      rec.local_time = std::string(trim(cols[off]));
      try {
        (void)parse_iso_seconds(rec.local_time);
      } catch (const FormatError&) {
        ok = false;
      }
    }
    ok = ok && parse_number(cols[off + 1], rec.tz_offset_minutes);
    for (std::size_t c = 0; ok && c < nch; ++c) {
      double v = 0.0;
      ok = parse_number(cols[off + 2 + c], v) && std::isfinite(v);
      rec.values.push_back(v);
    }
    if (ok)
      report.records.push_back(std::move(rec));
    else
      report.malformed_lines.push_back(line_no);
  }
  if (!report.malformed_lines.empty()) {
    const double frac = static_cast<double>(report.malformed_lines.size()) / static_cast<double>(report.total_lines);
    if (frac > kMaxMalformedFraction)
      throw FormatError(fmt::format("{}: {} of {} lines malformed (limit {:.0f}%), lines: {}", source,
                                    report.malformed_lines.size(), report.total_lines, kMaxMalformedFraction * 100,
                                    fmt::join(report.malformed_lines, ",")));
    spdlog::warn("{}: skipped {} malformed line(s): {}", source, report.malformed_lines.size(),
                 fmt::join(report.malformed_lines, ","));
  }
  return report;
}

ParseReport parse_sensor_file(const std::filesystem::path& path, ModalityId modality) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open sensor file '{}'", path.string()));
  return parse_sensor_stream(in, modality, path.string());
}

void write_sensor_stream(std::ostream& out, ModalityId modality, bool station, std::span<const RawRecord> records) {
  if (!station) out << "cow_id,";
  out << "timestamp,tz_offset_min";
  for (auto name : channel_names(modality)) out << ',' << name;
  out << '\n';
  std::string line;
  for (const auto& r : records) {
    line.clear();
    if (!station) {
      if (!r.cow) throw SchemaError("cow record without cow id");
      line += r.cow->str();
      line += ',';
    }
    line += r.local_time;
    line += fmt::format(",{}", r.tz_offset_minutes);
    for (double v : r.values) line += fmt::format(",{}", v);
    line += '\n';
    out << line;
  }
}

void write_sensor_file(const std::filesystem::path& path, ModalityId modality, bool station,
                       std::span<const RawRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write sensor file '{}'", path.string()));
  write_sensor_stream(out, modality, station, records);
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<UtcRecord> normalize_timestamps(std::span<const RawRecord> records) {
  std::vector<UtcRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.values.size() != channel_count(r.modality))
      throw SchemaError(fmt::format("record for modality {} has {} values, expected {}", to_string(r.modality),
                                    r.values.size(), channel_count(r.modality)));
    out.push_back({r.cow, r.modality, parse_iso_seconds(r.local_time) - std::int64_t{r.tz_offset_minutes} * 60,
                   r.values});
  }
  return out;
}

namespace {

// Aggregates the samples of one bin for one channel. Samples are sorted by time.
double aggregate_bin(std::span<const UtcRecord* const> samples, std::size_t ch, Aggregation agg, int max_gap) {
  switch (agg) {
    case Aggregation::last: return samples.back()->values[ch];
    case Aggregation::max: {
      double m = samples.front()->values[ch];
      for (const auto* s : samples) m = std::max(m, s->values[ch]);
      return m;
    }
    case Aggregation::mean: break;
  }
  // Mean over the 1 s linear fill. A segment [t_a, t_b) with gap g < max_gap
  // contributes g values v_a + (v_b - v_a) * j / g for j = 0..g-1.
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double va = samples[i]->values[ch];
    if (i + 1 < samples.size()) {
      const std::int64_t g = samples[i + 1]->utc_seconds - samples[i]->utc_seconds;
      if (g > 0 && g < max_gap) {
        const double vb = samples[i + 1]->values[ch];
        sum += static_cast<double>(g) * va + (vb - va) * static_cast<double>(g - 1) / 2.0;
        count += static_cast<double>(g);
        continue;
      }
    }
    sum += va;
    count += 1.0;
  }
  return sum / count;
}

ResampledStream resample_one(const StreamKey& key, std::vector<const UtcRecord*> recs, const IngestConfig& cfg) {
  std::stable_sort(recs.begin(), recs.end(),
                   [](const UtcRecord* a, const UtcRecord* b) { return a->utc_seconds < b->utc_seconds; });
  const std::int64_t bin_seconds = std::int64_t{60} * cfg.step_minutes;
  const std::int64_t first_bin = floor_div(recs.front()->utc_seconds, bin_seconds);
  const std::int64_t last_bin = floor_div(recs.back()->utc_seconds, bin_seconds);
  const auto length = static_cast<std::size_t>(last_bin - first_bin + 1);
  const std::size_t nch = channel_count(key.modality);
  const Aggregation agg = cfg.aggregation_for(key.modality);

  ResampledStream out;
  out.cow = key.cow;
  out.modality = key.modality;
  out.start = Timestamp{first_bin * cfg.step_minutes};
  out.channels.assign(nch, Series(length));
  std::size_t i = 0;
  while (i < recs.size()) {
    const std::int64_t bin = floor_div(recs[i]->utc_seconds, bin_seconds);
    std::size_t j = i;
    while (j < recs.size() && floor_div(recs[j]->utc_seconds, bin_seconds) == bin) ++j;
    const std::span<const UtcRecord* const> samples(recs.data() + i, j - i);
    const auto idx = static_cast<std::size_t>(bin - first_bin);
    for (std::size_t c = 0; c < nch; ++c) out.channels[c].set(idx, aggregate_bin(samples, c, agg, cfg.max_gap_seconds));
    i = j;
  }
  return out;
}

}  // namespace

std::vector<ResampledStream> resample_interpolate(std::span<const UtcRecord> records, const IngestConfig& cfg) {
  cfg.validate();
  std::map<StreamKey, std::vector<const UtcRecord*>> groups;
  for (const auto& r : records) {
    if (r.values.size() != channel_count(r.modality))
      throw SchemaError(fmt::format("record for modality {} has wrong channel count", to_string(r.modality)));
    groups[{is_station_modality(r.modality) ? std::nullopt : r.cow, r.modality}].push_back(&r);
  }
  std::vector<std::pair<StreamKey, std::vector<const UtcRecord*>>> items(groups.begin(), groups.end());
  std::vector<ResampledStream> out(items.size());
  parallel_for(items.size(), [&](std::size_t k) { out[k] = resample_one(items[k].first, items[k].second, cfg); });
  return out;
}

std::vector<AlignedFrame> group_and_frame(std::span<const ResampledStream> streams, int step_minutes) {
  if (step_minutes < 1) throw ConfigError("step_minutes must be >= 1");
  std::map<ModalityId, const ResampledStream*> station;
  std::map<CowId, std::vector<const ResampledStream*>> per_cow;
  for (const auto& s : streams) {
    if (s.length() == 0) continue;
    if ((s.start.epoch_minutes % step_minutes) != 0)
      throw ResolutionError(fmt::format("stream for {} is not on the {}-minute grid", to_string(s.modality),
                                        step_minutes));
    if (is_station_modality(s.modality) || !s.cow) {
      if (station.contains(s.modality))
        throw SchemaError(fmt::format("more than one station stream for modality {}", to_string(s.modality)));
      station[s.modality] = &s;
    } else {
      per_cow[*s.cow].push_back(&s);
    }
  }

  std::vector<std::pair<CowId, std::vector<const ResampledStream*>>> cows(per_cow.begin(), per_cow.end());
  std::vector<std::optional<AlignedFrame>> frames(cows.size());
  parallel_for(cows.size(), [&](std::size_t k) {
    const auto& [cow, own] = cows[k];
    Timestamp lo = own.front()->start;
    Timestamp hi = lo;
    for (const auto* s : own) {
      lo = std::min(lo, s->start);
      hi = std::max(hi, s->start + static_cast<std::int64_t>(s->length() - 1) * step_minutes);
    }
    const auto length = static_cast<std::size_t>((hi - lo) / step_minutes + 1);

    std::map<ModalityId, std::vector<Channel>> channels;
    for (ModalityId m : kSensorModalities) {
      auto& chs = channels[m];
      const auto names = channel_names(m);
      const auto units = channel_units(m);
      for (std::size_t c = 0; c < names.size(); ++c) chs.push_back({std::string(names[c]), std::string(units[c]), Series(length)});
    }
    auto copy_in = [&](const ResampledStream& s) {
      auto& chs = channels[s.modality];
      const bool hold_daily = s.modality == ModalityId::milk;
      for (std::size_t i = 0; i < s.length(); ++i) {
        const Timestamp t = s.start + static_cast<std::int64_t>(i) * step_minutes;
        if (!s.channels.front().has(i)) continue;
        // Milk is held from its record time to the end of that UTC day.
        const Timestamp until = hold_daily ? Timestamp{t.day_start() + 1440 - 1} : t;
        for (Timestamp u = std::max(t, lo); u <= std::min(until, hi); u = u + step_minutes) {
          const auto idx = static_cast<std::size_t>((u - lo) / step_minutes);
          for (std::size_t c = 0; c < chs.size(); ++c) chs[c].values.set(idx, s.channels[c].at(i));
        }
      }
    };
    for (const auto* s : own) copy_in(*s);
    for (const auto& [m, s] : station) copy_in(*s);
    frames[k] = AlignedFrame::build(cow, lo, length, std::move(channels), step_minutes);
  });

  std::vector<AlignedFrame> out;
  out.reserve(frames.size());
  for (auto& f : frames) out.push_back(std::move(*f));
  return out;
}

std::vector<AlignedFrame> ingest_records(std::span<const RawRecord> records, const IngestConfig& cfg) {
  cfg.validate();
  const auto utc = normalize_timestamps(records);
  const auto streams = resample_interpolate(utc, cfg);
  return group_and_frame(streams, cfg.step_minutes);
}

std::vector<AlignedFrame> ingest_directory(const std::filesystem::path& dir, const IngestConfig& cfg,
                                           IngestReport* report) {
  cfg.validate();
  std::filesystem::path root = dir;
  if (std::filesystem::is_directory(dir / "raw")) root = dir / "raw";
  if (!std::filesystem::is_directory(root)) throw IoError(fmt::format("data directory '{}' not found", dir.string()));
  std::vector<RawRecord> all;
  bool any = false;
  for (ModalityId m : kSensorModalities) {
    const auto path = root / fmt::format("{}.csv", to_string(m));
    if (!std::filesystem::exists(path)) continue;
    any = true;
    ParseReport pr = parse_sensor_file(path, m);
    if (report) {
      report->records[m] = pr.records.size();
      report->malformed_lines[m] = pr.malformed_lines;
    }
    std::move(pr.records.begin(), pr.records.end(), std::back_inserter(all));
  }
  if (!any) throw IoError(fmt::format("no sensor files found in '{}'", root.string()));
  spdlog::info("ingest: {} raw records from {}", all.size(), root.string());
  return ingest_records(all, cfg);
}

}  // namespace herdtwin
