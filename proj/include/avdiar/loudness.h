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

// Integrated loudness after ITU-R BS.1770: K-weighting (high shelf followed
// by high pass), mean square over 400 ms blocks with 75% overlap, an
// absolute gate at -70 LUFS and a relative gate 10 LU below the
// absolutely-gated level.

#include <optional>
#include <span>

namespace avdiar {

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

struct KWeighting {
  Biquad shelf;
  Biquad high_pass;
};

// Filter pair designed for `sample_rate` from the analog prototypes, so the
// response matches the 48 kHz reference coefficients at any rate.
KWeighting DesignKWeighting(int sample_rate);

// Direct form I, zero initial state.
void ApplyBiquad(const Biquad& f, std::span<double> signal);

inline constexpr double kBlockSeconds = 0.4;
inline constexpr double kAbsoluteGateLufs = -70.0;
inline constexpr double kRelativeGateLu = -10.0;

// Integrated loudness in LUFS. Returns an empty optional when no block
// survives gating (silence). Throws ContractError for input shorter than
// one 400 ms block or a non-positive rate.
std::optional<double> MeasureLufs(std::span<const double> samples, int sample_rate);

// Linear factor that moves `measured` to `target` LUFS.
double GainForTarget(double measured_lufs, double target_lufs);

}  // namespace avdiar
