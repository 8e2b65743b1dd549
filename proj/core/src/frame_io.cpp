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

#include "herdtwin/frame_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "herdtwin/binary_io.hpp"
#include "herdtwin/errors.hpp"

namespace herdtwin {

namespace {

std::string read_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("truncated frame preamble");
  return line;
}

std::string expect_key(const std::string& line, std::string_view key) {
  if (line.size() <= key.size() || line.compare(0, key.size(), key) != 0 || line[key.size()] != ' ')
    throw FormatError(fmt::format("expected '{}' line in frame preamble, got '{}'", key, line));
  return line.substr(key.size() + 1);
}

std::int64_t to_int(const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw FormatError("trailing characters");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(fmt::format("invalid integer '{}' in frame preamble", s));
  }
}

}  // namespace

void write_frame(std::ostream& out, const AlignedFrame& frame) {
  out << kFrameMagic << '\n';
  out << "cow " << frame.cow().str() << '\n';
  out << "start " << frame.start().epoch_minutes << '\n';
  out << "step " << frame.step_minutes() << '\n';
  out << "length " << frame.length() << '\n';
  out << "modalities " << frame.blocks().size() << '\n';
  for (const auto& [m, b] : frame.blocks()) {
    out << "modality " << to_string(m) << ' ' << b.channels.size() << '\n';
    for (const auto& ch : b.channels) out << "channel " << ch.name << ' ' << ch.unit << '\n';
  }
  out << "data\n";
  BinaryWriter w(out);
  for (const auto& [m, b] : frame.blocks()) {
    w.raw(b.missing.data(), b.missing.size());
    w.raw(b.time_since_obs.data(), b.time_since_obs.size() * sizeof(std::int64_t));
    for (const auto& ch : b.channels) {
      w.raw(ch.values.presence().data(), frame.length());
      w.raw(ch.values.raw_values().data(), frame.length() * sizeof(double));
    }
  }
}

AlignedFrame read_frame(std::istream& in) {
  const std::string magic = read_line(in);
  if (magic != kFrameMagic) throw VersionError(std::string(kFrameMagic), magic);
  CowId cow(expect_key(read_line(in), "cow"));
  const Timestamp start{to_int(expect_key(read_line(in), "start"))};
  const int step = static_cast<int>(to_int(expect_key(read_line(in), "step")));
  const auto length = static_cast<std::size_t>(to_int(expect_key(read_line(in), "length")));
  const auto n_mod = to_int(expect_key(read_line(in), "modalities"));

  struct Dir {
    ModalityId id;
    std::vector<std::pair<std::string, std::string>> channels;
  };
  std::vector<Dir> dir;
  for (std::int64_t i = 0; i < n_mod; ++i) {
    std::istringstream ls(expect_key(read_line(in), "modality"));
    std::string name;
    std::size_t n_ch = 0;
    if (!(ls >> name >> n_ch)) throw FormatError("malformed modality line");
    Dir d{modality_from_string(name), {}};
    for (std::size_t c = 0; c < n_ch; ++c) {
      std::istringstream cs(expect_key(read_line(in), "channel"));
      std::string cname, unit;
      if (!(cs >> cname >> unit)) throw FormatError("malformed channel line");
      d.channels.emplace_back(cname, unit);
    }
    dir.push_back(std::move(d));
  }
  if (read_line(in) != "data") throw FormatError("missing 'data' marker in frame preamble");

  BinaryReader r(in);
  std::map<ModalityId, ModalityBlock> blocks;
  for (const auto& d : dir) {
    ModalityBlock b;
    b.missing.resize(length);
    b.time_since_obs.resize(length);
    r.raw(b.missing.data(), length);
    r.raw(b.time_since_obs.data(), length * sizeof(std::int64_t));
    for (const auto& [cname, unit] : d.channels) {
      std::vector<std::uint8_t> mask(length);
      std::vector<double> values(length);
      r.raw(mask.data(), length);
      r.raw(values.data(), length * sizeof(double));
      Series s(length);
      for (std::size_t t = 0; t < length; ++t)
        if (mask[t]) s.set(t, values[t]);
      b.channels.push_back({cname, unit, std::move(s)});
    }
    blocks.emplace(d.id, std::move(b));
  }
  return AlignedFrame::restore(std::move(cow), start, length, step, std::move(blocks));
}

void write_frame_file(const std::filesystem::path& path, const AlignedFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_frame(out, frame);
}

AlignedFrame read_frame_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read_frame(in);
}

}  // namespace herdtwin
