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
#include <numbers>
#include <random>
#include <vector>

#include "avdiar/error.h"
#include "avdiar/loudness.h"
#include "doctest.h"

namespace avdiar {
namespace {

std::vector<double> Sine(double freq, double amplitude, double seconds, int rate) {
  std::vector<double> x(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  }
  return x;
}

TEST_CASE("k-weighting at 48 kHz reproduces the reference coefficients") {
  const KWeighting k = DesignKWeighting(48000);
  CHECK(k.shelf.b0 == doctest::Approx(1.53512485958697).epsilon(1e-10));
  CHECK(k.shelf.b1 == doctest::Approx(-2.69169618940638).epsilon(1e-10));
  CHECK(k.shelf.b2 == doctest::Approx(1.19839281085285).epsilon(1e-10));
  CHECK(k.shelf.a1 == doctest::Approx(-1.69065929318241).epsilon(1e-10));
  CHECK(k.shelf.a2 == doctest::Approx(0.73248077421585).epsilon(1e-10));
  CHECK(k.high_pass.b0 == 1.0);
  CHECK(k.high_pass.b1 == -2.0);
  CHECK(k.high_pass.b2 == 1.0);
  CHECK(k.high_pass.a1 == doctest::Approx(-1.99004745483398).epsilon(1e-10));
  CHECK(k.high_pass.a2 == doctest::Approx(0.99007225036621).epsilon(1e-10));
}

TEST_CASE("997 Hz full-scale sine reads -3.01 LUFS") {
  for (int rate : {16000, 48000}) {
    CAPTURE(rate);
    const auto lufs = MeasureLufs(Sine(997.0, 1.0, 5.0, rate), rate);
    REQUIRE(lufs.has_value());
    CHECK(std::abs(*lufs - (-3.01)) < 0.1);
  }
}

TEST_CASE("halving amplitude lowers loudness by 6.02 LU") {
  const auto full = MeasureLufs(Sine(440.0, 0.5, 3.0, 16000), 16000);
  const auto half = MeasureLufs(Sine(440.0, 0.25, 3.0, 16000), 16000);
  REQUIRE(full.has_value());
  REQUIRE(half.has_value());
  CHECK(std::abs((*full - *half) - 6.02) < 0.1);
}

TEST_CASE("applying the gain for a target reaches that target") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<double> x(16000 * 4);
  for (double& v : x) v = n(rng);
  const double before = *MeasureLufs(x, 16000);
  for (double target : {-17.0, -24.0, -29.0}) {
    const double g = GainForTarget(before, target);
    std::vector<double> y(x);
    for (double& v : y) v *= g;
    CHECK(std::abs(*MeasureLufs(y, 16000) - target) < 0.1);
  }
}

TEST_CASE("silence is unmeasurable and short input is rejected") {
  CHECK(!MeasureLufs(std::vector<double>(16000, 0.0), 16000).has_value());
  CHECK(!MeasureLufs(std::vector<double>(16000, 1e-6), 16000).has_value());
  CHECK_THROWS_AS(MeasureLufs(std::vector<double>(6399, 0.1), 16000), ContractError);
  CHECK_NOTHROW(MeasureLufs(std::vector<double>(6400, 0.1), 16000));
}

TEST_CASE("relative gate ignores quiet passages") {
  // Loud tone then a long stretch 30 dB down: the quiet blocks fall below
  // the relative gate. 17 loud blocks survive plus the three straddling the
  // boundary at 3/4, 1/2 and 1/4 of the loud power.
  const double loud = *MeasureLufs(Sine(1000.0, 0.5, 2.0, 16000), 16000);
  std::vector<double> x = Sine(1000.0, 0.5, 8.0, 16000);
  for (std::size_t i = 2 * 16000; i < x.size(); ++i) x[i] *= std::pow(10.0, -30.0 / 20.0);
  const double expected = loud + 10.0 * std::log10((17.0 + 1.5) / 20.0);
  CHECK(std::abs(*MeasureLufs(x, 16000) - expected) < 0.02);
}

}  // namespace
}  // namespace avdiar
