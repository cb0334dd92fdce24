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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "avdiar/error.h"
#include "avdiar/features.h"
#include "avdiar/wav.h"
#include "doctest.h"

namespace avdiar {
namespace {

Waveform Sine(double hz, double seconds, double amplitude = 0.5) {
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * kSampleRate));
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * i / kSampleRate);
  }
  return w;
}

TEST_CASE("logmel frame count and silence floor") {
  Waveform silence;
  silence.samples.assign(16000, 0.0);
  FeatureSequence f = LogMel(silence);
  CHECK(f.num_frames() == 98);  // floor((16000 - 400) / 160) + 1
  CHECK(f.dim() == 40);
  CHECK(f.frame_shift_s == doctest::Approx(0.01));
  for (double v : f.frames.data()) CHECK(v == std::log(1e-10));
}

TEST_CASE("frame count depends only on sample count") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t n : {400u, 401u, 559u, 560u, 16000u, 23456u}) {
    Waveform w;
    w.samples.resize(n);
    for (double& s : w.samples) s = noise(rng);
    CHECK(LogMel(w).num_frames() == (n - 400) / 160 + 1);
    CHECK(NumFrames(n) == (n - 400) / 160 + 1);
  }
}

TEST_CASE("a 1 kHz tone peaks in the filter centred nearest 1 kHz") {
  // Independent HTK-mel oracle for the filter centres.
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  int nearest = 0;
  double best = 1e9;
  for (int m = 0; m < 40; ++m) {
    const double centre = hz(mel(8000.0) * (m + 1) / 41.0);
    if (std::abs(centre - 1000.0) < best) {
      best = std::abs(centre - 1000.0);
      nearest = m;
    }
  }
  FeatureSequence f = LogMel(Sine(1000.0, 1.0));
  for (std::size_t t = 0; t < f.num_frames(); ++t) {
    auto row = f.frames.row(t);
    const auto argmax = std::max_element(row.begin(), row.end()) - row.begin();
    CHECK(argmax == nearest);
  }
  auto centres = MelCenterFrequencies();
  CHECK(centres[nearest] == doctest::Approx(hz(mel(8000.0) * (nearest + 1) / 41.0)));
}

TEST_CASE("logmel input errors") {
  CHECK_THROWS_AS(LogMel(Waveform{}), InputError);
  Waveform short_wave;
  short_wave.samples.assign(399, 0.0);
  CHECK_THROWS_AS(LogMel(short_wave), InputError);
  Waveform wrong_rate;
  wrong_rate.samples.assign(16000, 0.0);
  wrong_rate.sample_rate = 8000;
  CHECK_THROWS_AS(LogMel(wrong_rate), InputError);
}

FeatureSequence Ramp(std::size_t frames, std::size_t dim) {
  FeatureSequence f;
  f.frames = Matrix(frames, dim);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t d = 0; d < dim; ++d) f.frames(t, d) = 100.0 * t + d;
  return f;
}

TEST_CASE("splice and subsample") {
  SUBCASE("context 0, factor 1 is the identity") {
    FeatureSequence f = Ramp(13, 3);
    FeatureSequence g = SpliceSubsample(f, 0, 1);
    CHECK(g.frames == f.frames);
    CHECK(g.frame_shift_s == f.frame_shift_s);
  }
  SUBCASE("paper-scale shapes") {
    FeatureSequence g = SpliceSubsample(Ramp(100, 40), 7, 10);
    CHECK(g.num_frames() == 10);
    CHECK(g.dim() == 600);
    CHECK(g.frame_shift_s == doctest::Approx(0.1));
    CHECK(SpliceSubsample(Ramp(101, 40), 7, 10).num_frames() == 11);
  }
  SUBCASE("constant input stays constant") {
    FeatureSequence f;
    f.frames = Matrix(25, 4, -3.5);
    FeatureSequence g = SpliceSubsample(f, 7, 10);
    for (double v : g.frames.data()) CHECK(v == -3.5);
  }
  SUBCASE("centre block recovers the original frame, edges replicate") {
    FeatureSequence f = Ramp(31, 5);
    FeatureSequence g = SpliceSubsample(f, 7, 3);
    for (std::size_t o = 0; o < g.num_frames(); ++o) {
      for (std::size_t d = 0; d < 5; ++d) CHECK(g.frames(o, 7 * 5 + d) == f.frames(3 * o, d));
    }
    // First output frame: left context replicates frame 0.
    for (int c = 0; c < 7; ++c) CHECK(g.frames(0, c * 5) == f.frames(0, 0));
    // Last output frame (t=30): right context replicates frame 30.
    const std::size_t last = g.num_frames() - 1;
    for (int c = 8; c < 15; ++c) CHECK(g.frames(last, c * 5) == f.frames(30, 0));
  }
  CHECK_THROWS_AS(SpliceSubsample(Ramp(3, 2), -1, 1), ConfigError);
  CHECK_THROWS_AS(SpliceSubsample(Ramp(3, 2), 1, 0), ConfigError);
}

TEST_CASE("wav round trip and rejection") {
  const auto dir = std::filesystem::temp_directory_path() / "avdiar_wav_test";
  std::filesystem::create_directories(dir);
  Waveform w = Sine(440.0, 0.1, 0.25);
  WriteWav(dir / "f32.wav", w, WavEncoding::kFloat32);
  Waveform r = ReadWav(dir / "f32.wav");
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(r.samples[i] == static_cast<double>(static_cast<float>(w.samples[i])));

  WriteWav(dir / "pcm.wav", w, WavEncoding::kPcm16);
  Waveform p = ReadWav(dir / "pcm.wav");
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(p.samples[i] - w.samples[i]) < 1.0 / 16000.0);

  Waveform stereo_rate = w;
  stereo_rate.sample_rate = 44100;
  WriteWav(dir / "rate.wav", stereo_rate);
  CHECK_THROWS_AS(ReadWav(dir / "rate.wav"), InputError);
  std::ofstream(dir / "junk.wav") << "not a wav file at all";
  CHECK_THROWS_AS(ReadWav(dir / "junk.wav"), InputError);
  CHECK_THROWS_AS(ReadWav(dir / "missing.wav"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace avdiar
