// Copyright 2026 The avdiar Authors.
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

// Timestamped speaker segments and their RTTM serialization.

#include <filesystem>
#include <string>
#include <vector>

#include "avdiar/matrix.h"

namespace avdiar {

struct Segment {
  std::string recording;
  std::string speaker;
  double onset = 0.0;  // seconds
  double offset = 0.0;  // seconds, > onset
};

using SegmentList = std::vector<Segment>;

// Sorts by (recording, onset, offset, speaker).
void SortSegments(SegmentList& segments);

// One line per segment:
//   SPEAKER <rec> 1 <onset> <duration> <NA> <NA> <speaker> <NA> <NA>
// with onset and duration at millisecond precision.
std::string RttmString(const SegmentList& segments);
void WriteRttm(const std::filesystem::path& path, const SegmentList& segments);

// Lines that are blank or start with ';' are ignored; other line types are
// skipped and reported through `warnings` when given. Malformed SPEAKER
// lines raise ParseError naming the line number.
SegmentList ParseRttm(const std::string& text, std::vector<std::string>* warnings = nullptr);
SegmentList ReadRttm(const std::filesystem::path& path,
                     std::vector<std::string>* warnings = nullptr);

// Distinct speaker labels in first-appearance order.
std::vector<std::string> SpeakerOrder(const SegmentList& segments);

// Binary T x S frame labels: frame t of speaker s is 1 when the frame center
// (t + 0.5) * shift falls inside one of that speaker's segments.
Matrix SegmentsToFrames(const SegmentList& segments, const std::vector<std::string>& speakers,
                        double frame_shift_s, std::size_t frames);

}  // namespace avdiar
