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

// Log-mel filterbank front end: 25 ms Hann frames every 10 ms at 16 kHz,
// HTK mel scale over 0-8 kHz, then context splicing and subsampling to the
// model's input rate.

#include <vector>

#include "avdiar/matrix.h"
#include "avdiar/wav.h"

namespace avdiar {

struct FeatureSequence {
  Matrix frames;  // T x F
  double frame_shift_s = 0.01;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

struct FrontendConfig {
  int n_mels = 40;
  int frame_length = 400;  // samples, 25 ms
  int frame_shift = 160;   // samples, 10 ms
  int fft_size = 512;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double energy_floor = 1e-10;
  int context = 7;
  int subsample = 10;
};

// Frame count for `num_samples` samples without padding.
std::size_t NumFrames(std::size_t num_samples, const FrontendConfig& cfg = {});

double HzToMel(double hz);
double MelToHz(double mel);
// Center frequency of each triangular filter.
std::vector<double> MelCenterFrequencies(const FrontendConfig& cfg = {});

// Throws InputError for an empty waveform, a waveform shorter than one
// frame, or a sample rate other than 16 kHz.
FeatureSequence LogMel(const Waveform& wave, const FrontendConfig& cfg = {});

// Stacks each frame with `context` neighbours on both sides (edge frames
// replicated) and keeps every `factor`-th frame starting at 0. Output is
// ceil(T / factor) frames of width F * (2 * context + 1).
FeatureSequence SpliceSubsample(const FeatureSequence& in, int context, int factor);

// LogMel followed by SpliceSubsample with the config's context and factor.
FeatureSequence ComputeModelFeatures(const Waveform& wave, const FrontendConfig& cfg = {});

}  // namespace avdiar
