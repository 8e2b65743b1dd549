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

#include <filesystem>
#include <iosfwd>

#include "herdtwin/timeseries.hpp"

namespace herdtwin {

inline constexpr std::string_view kFrameMagic = "TWINFRAME v1";

/// Container layout: a text preamble (magic line, identity, span, channel
/// directory, terminated by a "data" line) followed by a little-endian binary
/// body. Per modality the body holds the missing flags (T bytes), the
/// time-since-observation counters (T int64), then per channel a presence
/// mask (T bytes) and the values (T doubles, 0.0 where absent).
void write_frame(std::ostream& out, const AlignedFrame& frame);
AlignedFrame read_frame(std::istream& in);

void write_frame_file(const std::filesystem::path& path, const AlignedFrame& frame);
AlignedFrame read_frame_file(const std::filesystem::path& path);

}  // namespace herdtwin
