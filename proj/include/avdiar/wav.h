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
#include <vector>

namespace avdiar {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads RIFF WAVE, mono, 16 kHz, either 16-bit PCM or 32-bit IEEE float.
// Any other layout raises InputError describing what was found; a missing
// or unreadable file raises IoError naming the path.
Waveform ReadWav(const std::filesystem::path& path);

void WriteWav(const std::filesystem::path& path, const Waveform& wave,
              WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace avdiar
