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


#include "avdiar/segments.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "avdiar/error.h"

namespace avdiar {
namespace {

double ParseField(const std::string& field, const char* what, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || !std::isfinite(v)) {
    throw ParseError("rttm line " + std::to_string(line_no) + ": bad " + what + " '" + field + "'");
  }
  return v;
}

}  // namespace

void SortSegments(SegmentList& segments) {
  std::stable_sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) {
    return std::tie(a.recording, a.onset, a.offset, a.speaker) <
           std::tie(b.recording, b.onset, b.offset, b.speaker);
  });
}

std::string RttmString(const SegmentList& segments) {
  std::string out;
  char buf[64];
  for (const Segment& s : segments) {
    out += "SPEAKER " + s.recording + " 1 ";
    std::snprintf(buf, sizeof(buf), "%.3f %.3f", s.onset, s.offset - s.onset);
    out += buf;
    out += " <NA> <NA> " + s.speaker + " <NA> <NA>\n";
  }
  return out;
}

void WriteRttm(const std::filesystem::path& path, const SegmentList& segments) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << RttmString(segments);
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

SegmentList ParseRttm(const std::string& text, std::vector<std::string>* warnings) {
  SegmentList out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty() || f[0][0] == ';') continue;
    if (f[0] != "SPEAKER") {
      if (warnings) {
        warnings->push_back("rttm line " + std::to_string(line_no) + ": skipping " + f[0] +
                            " record");
      }
      continue;
    }
    if (f.size() < 8) {
      throw ParseError("rttm line " + std::to_string(line_no) + ": expected at least 8 fields, got " +
                       std::to_string(f.size()));
    }
    const double onset = ParseField(f[3], "onset", line_no);
    const double duration = ParseField(f[4], "duration", line_no);
    if (onset < 0.0 || duration < 0.0) {
      throw ParseError("rttm line " + std::to_string(line_no) + ": negative onset or duration");
    }
    if (duration == 0.0) continue;
    out.push_back({f[1], f[7], onset, onset + duration});
  }
  return out;
}

SegmentList ReadRttm(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return ParseRttm(buf.str(), warnings);
}

std::vector<std::string> SpeakerOrder(const SegmentList& segments) {
  std::vector<std::string> order;
  for (const Segment& s : segments) {
    if (std::find(order.begin(), order.end(), s.speaker) == order.end()) order.push_back(s.speaker);
  }
  return order;
}

Matrix SegmentsToFrames(const SegmentList& segments, const std::vector<std::string>& speakers,
                        double frame_shift_s, std::size_t frames) {
  if (!(frame_shift_s > 0.0)) throw ContractError("frame shift must be positive");
  Matrix y(frames, speakers.size(), 0.0);
  for (const Segment& seg : segments) {
    const auto it = std::find(speakers.begin(), speakers.end(), seg.speaker);
    if (it == speakers.end()) continue;
    const std::size_t s = static_cast<std::size_t>(it - speakers.begin());
    // center (t + 0.5) * shift in [onset, offset)
    const double first = std::ceil(seg.onset / frame_shift_s - 0.5);
    const double last = std::ceil(seg.offset / frame_shift_s - 0.5);  // exclusive
    const std::size_t lo = static_cast<std::size_t>(std::max(0.0, first));
    const std::size_t hi = static_cast<std::size_t>(std::clamp(last, 0.0, double(frames)));
    for (std::size_t t = lo; t < hi; ++t) y(t, s) = 1.0;
  }
  return y;
}

}  // namespace avdiar
