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

#include "avdiar/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "avdiar/error.h"

namespace avdiar {
namespace {

struct FftwPlan {
  explicit FftwPlan(int n) : size(n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  ~FftwPlan() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;

  int size;
  double* in;
  fftw_complex* out;
  fftw_plan plan;
};

// filters[m] holds the weight of every FFT bin for mel filter m.
std::vector<std::vector<double>> MelFilterbank(const FrontendConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  const double mel_lo = HzToMel(cfg.low_hz);
  const double mel_hi = HzToMel(cfg.high_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  std::vector<std::vector<double>> filters(cfg.n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * kSampleRate / cfg.fft_size;
      if (hz > left && hz < right) {
        filters[m][k] = hz <= center ? (hz - left) / (center - left)
                                     : (right - hz) / (right - center);
      }
    }
  }
  return filters;
}

}  // namespace

std::size_t NumFrames(std::size_t num_samples, const FrontendConfig& cfg) {
  const auto len = static_cast<std::size_t>(cfg.frame_length);
  if (num_samples < len) return 0;
  return (num_samples - len) / static_cast<std::size_t>(cfg.frame_shift) + 1;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> MelCenterFrequencies(const FrontendConfig& cfg) {
  const double mel_lo = HzToMel(cfg.low_hz);
  const double mel_hi = HzToMel(cfg.high_hz);
  std::vector<double> centers(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    centers[m] = MelToHz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
  }
  return centers;
}

FeatureSequence LogMel(const Waveform& wave, const FrontendConfig& cfg) {
  if (wave.sample_rate != kSampleRate) {
    throw InputError("expected 16000 Hz audio, got " + std::to_string(wave.sample_rate));
  }
  if (wave.samples.empty()) throw InputError("empty waveform");
  const std::size_t frames = NumFrames(wave.samples.size(), cfg);
  if (frames == 0) {
    throw InputError("waveform of " + std::to_string(wave.samples.size()) +
                     " samples is shorter than one frame");
  }
  std::vector<double> window(cfg.frame_length);
  for (int n = 0; n < cfg.frame_length; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.frame_length);
  }
  const auto filters = MelFilterbank(cfg);
  const int bins = cfg.fft_size / 2 + 1;
  FftwPlan fft(cfg.fft_size);
  std::vector<double> power(bins);

  FeatureSequence out;
  out.frame_shift_s = static_cast<double>(cfg.frame_shift) / kSampleRate;
  out.frames = Matrix(frames, cfg.n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = wave.samples.data() + t * cfg.frame_shift;
    std::fill(fft.in, fft.in + cfg.fft_size, 0.0);
    for (int n = 0; n < cfg.frame_length; ++n) fft.in[n] = src[n] * window[n];
    fftw_execute(fft.plan);
    for (int k = 0; k < bins; ++k) {
      power[k] = fft.out[k][0] * fft.out[k][0] + fft.out[k][1] * fft.out[k][1];
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
      double energy = 0.0;
      for (int k = 0; k < bins; ++k) energy += filters[m][k] * power[k];
      out.frames(t, m) = std::log(std::max(energy, cfg.energy_floor));
    }
  }
  return out;
}

FeatureSequence SpliceSubsample(const FeatureSequence& in, int context, int factor) {
  if (context < 0) throw ConfigError("splice context must be >= 0");
  if (factor < 1) throw ConfigError("subsampling factor must be >= 1");
  const std::size_t frames = in.num_frames();
  const std::size_t dim = in.dim();
  const std::size_t width = dim * (2 * context + 1);
  const std::size_t out_frames = (frames + factor - 1) / factor;
  FeatureSequence out;
  out.frame_shift_s = in.frame_shift_s * factor;
  out.frames = Matrix(out_frames, width);
  const auto last = static_cast<long>(frames) - 1;
  for (std::size_t o = 0; o < out_frames; ++o) {
    const long center = static_cast<long>(o) * factor;
    auto dst = out.frames.row(o);
    for (int c = -context; c <= context; ++c) {
      const long src = std::clamp(center + c, 0L, last);
      auto row = in.frames.row(static_cast<std::size_t>(src));
      std::copy(row.begin(), row.end(), dst.begin() + (c + context) * dim);
    }
  }
  return out;
}

FeatureSequence ComputeModelFeatures(const Waveform& wave, const FrontendConfig& cfg) {
  return SpliceSubsample(LogMel(wave, cfg), cfg.context, cfg.subsample);
}

}  // namespace avdiar
