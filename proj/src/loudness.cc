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


#include "avdiar/loudness.h"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "avdiar/error.h"

namespace avdiar {
namespace {

// Analog prototype of the K-weighting stages, mapped with a prewarped
// bilinear transform.
constexpr double kShelfGainDb = 3.999843853973347;
constexpr double kShelfQ = 0.7071752369554196;
constexpr double kShelfFc = 1681.974450955533;
constexpr double kShelfBandExponent = 0.4996667741545416;
constexpr double kHighPassQ = 0.5003270373238773;
constexpr double kHighPassFc = 38.13547087602444;

}  // namespace

KWeighting DesignKWeighting(int sample_rate) {
  if (sample_rate <= 0) throw ContractError("sample rate must be positive");
  const double fs = sample_rate;
  KWeighting k;
  {
    const double kk = std::tan(std::numbers::pi * kShelfFc / fs);
    const double vh = std::pow(10.0, kShelfGainDb / 20.0);
    const double vb = std::pow(vh, kShelfBandExponent);
    const double a0 = 1.0 + kk / kShelfQ + kk * kk;
    k.shelf = {(vh + vb * kk / kShelfQ + kk * kk) / a0, 2.0 * (kk * kk - vh) / a0,
               (vh - vb * kk / kShelfQ + kk * kk) / a0, 2.0 * (kk * kk - 1.0) / a0,
               (1.0 - kk / kShelfQ + kk * kk) / a0};
  }
  {
    const double kk = std::tan(std::numbers::pi * kHighPassFc / fs);
    const double a0 = 1.0 + kk / kHighPassQ + kk * kk;
    k.high_pass = {1.0, -2.0, 1.0, 2.0 * (kk * kk - 1.0) / a0, (1.0 - kk / kHighPassQ + kk * kk) / a0};
  }
  return k;
}

void ApplyBiquad(const Biquad& f, std::span<double> x) {
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = f.b0 * v + f.b1 * x1 + f.b2 * x2 - f.a1 * y1 - f.a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

std::optional<double> MeasureLufs(std::span<const double> samples, int sample_rate) {
  if (sample_rate <= 0) throw ContractError("sample rate must be positive");
  const std::size_t block = static_cast<std::size_t>(std::lround(kBlockSeconds * sample_rate));
  const std::size_t step = block / 4;
  if (samples.size() < block) {
    throw ContractError("loudness needs at least 400 ms of audio, got " +
                        std::to_string(samples.size()) + " samples");
  }
  std::vector<double> y(samples.begin(), samples.end());
  const KWeighting k = DesignKWeighting(sample_rate);
  ApplyBiquad(k.shelf, y);
  ApplyBiquad(k.high_pass, y);

  // Running prefix of squares keeps each block O(1).
  std::vector<double> prefix(y.size() + 1, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) prefix[i + 1] = prefix[i] + y[i] * y[i];
  const std::size_t n_blocks = (y.size() - block) / step + 1;
  std::vector<double> z(n_blocks);
  for (std::size_t j = 0; j < n_blocks; ++j) {
    z[j] = (prefix[j * step + block] - prefix[j * step]) / static_cast<double>(block);
  }
  auto loudness = [](double power) { return -0.691 + 10.0 * std::log10(power); };

  auto gated_mean = [&](double threshold) -> std::optional<double> {
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : z) {
      if (v > 0.0 && loudness(v) > threshold) {
        sum += v;
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  };
  const std::optional<double> abs_mean = gated_mean(kAbsoluteGateLufs);
  if (!abs_mean) return std::nullopt;
  const double relative = loudness(*abs_mean) + kRelativeGateLu;
  const std::optional<double> final_mean = gated_mean(std::max(relative, kAbsoluteGateLufs));
  if (!final_mean) return std::nullopt;
  return loudness(*final_mean);
}

double GainForTarget(double measured_lufs, double target_lufs) {
  return std::pow(10.0, (target_lufs - measured_lufs) / 20.0);
}

}  // namespace avdiar
