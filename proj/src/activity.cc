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

#include "avdiar/activity.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "avdiar/error.h"

namespace avdiar {

std::string ActivityCsvString(const ActivityMatrix& activity) {
  std::string out = "t";
  for (std::size_t s = 0; s < activity.num_streams(); ++s) out += ",s" + std::to_string(s);
  out += '\n';
  char buf[64];
  for (std::size_t t = 0; t < activity.num_frames(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(t) * activity.frame_shift_s);
    out += buf;
    for (std::size_t s = 0; s < activity.num_streams(); ++s) {
      std::snprintf(buf, sizeof(buf), ",%.17g", activity.probs(t, s));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void WriteActivityCsv(const std::filesystem::path& path, const ActivityMatrix& activity) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << ActivityCsvString(activity);
}

ActivityMatrix ReadActivityCsv(const std::filesystem::path& path, double default_shift_s) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t streams = 0;
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line_no == 1) {
      if (fields.empty() || fields[0] != "t") {
        throw ParseError(path.string() + ":1: expected header starting with 't'");
      }
      streams = fields.size() - 1;
      continue;
    }
    if (fields.size() != streams + 1) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(streams + 1) + " fields, found " +
                       std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(fields[i].c_str(), &end);
      if (end == fields[i].c_str() || *end != '\0' || !std::isfinite(v)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": malformed number '" + fields[i] + "'");
      }
      if (i == 0) times.push_back(v);
      else values.push_back(v);
    }
  }
  if (line_no == 0) throw ParseError(path.string() + ": empty file");
  ActivityMatrix activity;
  activity.probs = Matrix(times.size(), streams, std::move(values));
  activity.frame_shift_s = times.size() >= 2 ? times[1] - times[0] : default_shift_s;
  // Time stamps are printed with 6 decimals; snap the shift to that grid.
  activity.frame_shift_s = std::round(activity.frame_shift_s * 1e6) / 1e6;
  ValidateActivity(activity);
  return activity;
}

void ValidateActivity(const ActivityMatrix& activity) {
  for (double v : activity.probs.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractError("activity value " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

}  // namespace avdiar
