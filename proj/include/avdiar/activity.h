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

#include <filesystem>
#include <string>

#include "avdiar/matrix.h"

namespace avdiar {

// T x S per-frame, per-stream speech probabilities in [0, 1]. Frame t covers
// [t * frame_shift_s, (t + 1) * frame_shift_s).
struct ActivityMatrix {
  Matrix probs;
  double frame_shift_s = 0.1;

  std::size_t num_frames() const { return probs.rows(); }
  std::size_t num_streams() const { return probs.cols(); }
};

// CSV layout: header `t,s0,s1,...`, then one row per frame with the frame
// start time in seconds and each stream's probability printed with 17
// significant digits. A matrix with zero streams writes only `t`.
void WriteActivityCsv(const std::filesystem::path& path, const ActivityMatrix& activity);
std::string ActivityCsvString(const ActivityMatrix& activity);

// Infers the frame shift from the first two time stamps (a single-row file
// needs `default_shift_s`). Raises ParseError with the line number on
// malformed input and IoError if the file cannot be read.
ActivityMatrix ReadActivityCsv(const std::filesystem::path& path,
                               double default_shift_s = 0.1);

// Raises ContractError if any entry is outside [0, 1] or not finite.
void ValidateActivity(const ActivityMatrix& activity);

}  // namespace avdiar
