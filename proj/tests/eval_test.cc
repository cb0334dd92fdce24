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


#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "avdiar/error.h"
#include "avdiar/eval.h"
#include "doctest.h"

namespace avdiar {
namespace {

// Per speaker: disjoint, non-touching segments at millisecond resolution.
SegmentList RandomSegments(std::mt19937_64& rng, std::size_t speakers, const std::string& prefix,
                           double length, double min_len = 0.05) {
  SegmentList out;
  std::uniform_real_distribution<double> u(0.0, length);
  std::uniform_int_distribution<int> count(1, 4);
  for (std::size_t s = 0; s < speakers; ++s) {
    std::vector<double> cuts;
    for (int k = 0; k < 2 * count(rng); ++k) cuts.push_back(std::round(u(rng) * 1000) / 1000);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); k += 2) {
      if (cuts[k + 1] - cuts[k] < min_len) continue;
      if (k > 0 && cuts[k] == cuts[k - 1]) continue;
      out.push_back({"rec", prefix + std::to_string(s), cuts[k], cuts[k + 1]});
    }
  }
  SortSegments(out);
  return out;
}

// Independent 10 ms frame-counting scorer with a brute-force speaker
// mapping over all injections of reference into hypothesis speakers.
double FrameOracleDer(const SegmentList& ref, const SegmentList& hyp, double collar, double length) {
  const double step = 0.01;
  const std::size_t frames = static_cast<std::size_t>(std::ceil(length / step)) + 100;
  std::vector<std::string> rn, hn;
  for (const auto& s : ref)
    if (std::find(rn.begin(), rn.end(), s.speaker) == rn.end()) rn.push_back(s.speaker);
  for (const auto& s : hyp)
    if (std::find(hn.begin(), hn.end(), s.speaker) == hn.end()) hn.push_back(s.speaker);
  auto raster = [&](const SegmentList& segs, const std::vector<std::string>& names) {
    std::vector<std::vector<char>> on(names.size(), std::vector<char>(frames, 0));
    for (const auto& s : segs) {
      const std::size_t k = std::find(names.begin(), names.end(), s.speaker) - names.begin();
      for (std::size_t t = 0; t < frames; ++t) {
        const double c = (t + 0.5) * step;
        if (c >= s.onset && c < s.offset) on[k][t] = 1;
      }
    }
    return on;
  };
  const auto r = raster(ref, rn), h = raster(hyp, hn);
  std::vector<char> scored(frames, 1);
  for (const auto& s : ref)
    for (std::size_t t = 0; t < frames; ++t) {
      const double c = (t + 0.5) * step;
      if (std::abs(c - s.onset) < collar || std::abs(c - s.offset) < collar) scored[t] = 0;
    }
  // Enumerate mappings: map[i] in {-1} ∪ hyp, injective.
  std::vector<int> map(rn.size(), -1), best_map;
  long best_overlap = -1;
  std::function<void(std::size_t, std::set<int>&)> rec = [&](std::size_t i, std::set<int>& used) {
    if (i == rn.size()) {
      long ov = 0;
      for (std::size_t a = 0; a < rn.size(); ++a)
        if (map[a] >= 0)
          for (std::size_t t = 0; t < frames; ++t) ov += scored[t] && r[a][t] && h[map[a]][t];
      if (ov > best_overlap) {
        best_overlap = ov;
        best_map = map;
      }
      return;
    }
    map[i] = -1;
    rec(i + 1, used);
    for (int j = 0; j < int(hn.size()); ++j) {
      if (used.count(j)) continue;
      used.insert(j);
      map[i] = j;
      rec(i + 1, used);
      used.erase(j);
    }
    map[i] = -1;
  };
  std::set<int> used;
  rec(0, used);
  long total = 0, err = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (!scored[t]) continue;
    int nr = 0, nh = 0, nc = 0;
    for (std::size_t a = 0; a < rn.size(); ++a) nr += r[a][t];
    for (std::size_t b = 0; b < hn.size(); ++b) nh += h[b][t];
    for (std::size_t a = 0; a < rn.size(); ++a) nc += r[a][t] && best_map[a] >= 0 && h[best_map[a]][t];
    total += nr;
    err += std::max(nr, nh) - nc;
  }
  return total ? 100.0 * err / total : 0.0;
}

TEST_CASE("binarize: threshold, median filter, frame-boundary segments") {
  ActivityMatrix a{Matrix(20, 2, 0.9), 0.1};
  SegmentList s = Binarize(a, 0.5, 1, "r");
  REQUIRE(s.size() == 2);
  CHECK(s[0].onset == 0.0);
  CHECK(s[0].offset == doctest::Approx(2.0));
  CHECK(s[0].recording == "r");

  ActivityMatrix low{Matrix(20, 2, 0.1), 0.1};
  CHECK(Binarize(low, 0.5, 11, "r").empty());

  ActivityMatrix spike{Matrix(20, 1, 0.0), 0.1};
  spike.probs(7, 0) = 1.0;
  CHECK(Binarize(spike, 0.5, 1, "r").size() == 1);
  CHECK(Binarize(spike, 0.5, 3, "r").empty());

  ActivityMatrix run{Matrix(20, 1, 0.0), 0.1};
  for (int t = 5; t < 12; ++t) run.probs(t, 0) = 0.8;
  run.probs(8, 0) = 0.2;  // one-frame hole closed by the filter
  const SegmentList r = Binarize(run, 0.5, 3, "r");
  REQUIRE(r.size() == 1);
  CHECK(r[0].onset == doctest::Approx(0.5));
  CHECK(r[0].offset == doctest::Approx(1.2));

  CHECK_THROWS_AS(Binarize(a, 0.5, 4, "r"), ContractError);
  CHECK_THROWS_AS(Binarize(a, 1.0, 3, "r"), ContractError);
}

TEST_CASE("der: identical input scores zero exactly") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const SegmentList ref = RandomSegments(rng, 3, "A", 30.0);
    const ScoreReport r = ScoreRecording(ref, ref);
    CHECK(r.der == 0.0);
    CHECK(r.ms == 0.0);
    CHECK(r.fa == 0.0);
    CHECK(r.se == 0.0);
    CHECK(r.jer == 0.0);
  }
}

TEST_CASE("der: aggregation identity from error times") {
  const ScoreReport r = ReportFromTimes({100.0, 17.4, 9.1, 18.9});
  CHECK(r.ms == doctest::Approx(17.4));
  CHECK(r.fa == doctest::Approx(9.1));
  CHECK(r.se == doctest::Approx(18.9));
  CHECK(std::abs(r.der - 45.4) < 1e-9);
}

TEST_CASE("der: single speaker truncated hypothesis") {
  const SegmentList ref = {{"r", "A", 0.0, 10.0}};
  const SegmentList hyp = {{"r", "x", 0.0, 8.0}};
  const ScoreReport r = ScoreRecording(ref, hyp, 0.25);
  // Scored reference [0.25, 9.75); missed [8, 9.75).
  CHECK(r.der == doctest::Approx(100.0 * 1.75 / 9.5));
  CHECK(r.ms == doctest::Approx(r.der));
  CHECK(std::abs(r.der - FrameOracleDer(ref, hyp, 0.25, 10.0)) < 0.5);
  CHECK(r.mapping.at("A") == "x");
}

TEST_CASE("der: interval arithmetic matches the 10 ms frame oracle") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> n(1, 3);
  int checked = 0;
  for (int i = 0; checked < 50; ++i) {
    // The bound is in absolute points, so instances need enough scored
    // reference speech (>= 10 s) for 10 ms quantization to stay small.
    const SegmentList ref = RandomSegments(rng, n(rng), "R", 30.0, 1.0);
    const SegmentList hyp = RandomSegments(rng, n(rng), "H", 30.0, 0.05);
    const ScoreReport r = ScoreRecording(ref, hyp, 0.25);
    if (r.times.scored_speech < 10.0) continue;
    ++checked;
    CAPTURE(i);
    CHECK(std::abs(r.der - FrameOracleDer(ref, hyp, 0.25, 30.0)) < 0.5);
    CHECK(std::abs(r.der - (r.ms + r.fa + r.se)) < 1e-9);
    CHECK(r.ms >= 0.0);
    CHECK(r.fa >= 0.0);
    CHECK(r.se >= 0.0);
  }
}

TEST_CASE("der: relabeling invariance and collar monotonicity") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const SegmentList ref = RandomSegments(rng, 3, "R", 20.0);
    const SegmentList hyp = RandomSegments(rng, 3, "H", 20.0);
    SegmentList renamed = hyp;
    for (auto& s : renamed) s.speaker = "zz" + std::string(1, char('c' - (s.speaker.back() - '0')));
    const ScoreReport a = ScoreRecording(ref, hyp);
    const ScoreReport b = ScoreRecording(ref, renamed);
    CHECK(a.der == doctest::Approx(b.der).epsilon(1e-12));
    double prev = INFINITY;
    for (double collar : {0.0, 0.1, 0.25, 0.5, 1.0}) {
      const ScoreReport c = ScoreRecording(ref, hyp, collar);
      if (!c.scorable) break;
      const double missed_fa_se = c.times.missed + c.times.false_alarm + c.times.speaker_error;
      CHECK(missed_fa_se <= prev + 1e-9);
      prev = missed_fa_se;
    }
  }
}

TEST_CASE("der: speaker error and overlap accounting") {
  // Two reference speakers overlapping; hypothesis swaps one region.
  const SegmentList ref = {{"r", "A", 0, 10}, {"r", "B", 5, 15}};
  const SegmentList hyp = {{"r", "a", 0, 10}, {"r", "b", 10, 15}};
  const ScoreReport r = ScoreRecording(ref, hyp, 0.0);
  // Scored speech 20 s; B missed in [5, 10).
  CHECK(r.times.scored_speech == doctest::Approx(20.0));
  CHECK(r.times.missed == doctest::Approx(5.0));
  CHECK(r.times.false_alarm == doctest::Approx(0.0));
  CHECK(r.times.speaker_error == doctest::Approx(0.0));

  const SegmentList wrong = {{"r", "a", 0, 15}};
  const ScoreReport w = ScoreRecording(ref, wrong, 0.0);
  // A mapped to a; B missed in overlap [5,10), confused in [10,15).
  CHECK(w.times.missed == doctest::Approx(5.0));
  CHECK(w.times.speaker_error == doctest::Approx(5.0));
}

TEST_CASE("der: reference entirely inside the collar is unscorable") {
  const SegmentList ref = {{"r", "A", 1.0, 1.4}};
  const ScoreReport r = ScoreRecording(ref, {}, 0.25);
  CHECK(!r.scorable);
  CHECK(r.der == 0.0);
  const CorpusScore c = ScoreCorpus(ref, {}, 0.25);
  CHECK(!c.total.scorable);
  CHECK(FormatScoreTable(c).find("unscorable") != std::string::npos);
}

TEST_CASE("jer: set arithmetic cases") {
  const SegmentList ref = {{"r", "A", 0, 10}};
  const SegmentList half = {{"r", "x", 0, 5}};
  CHECK(JaccardErrorRate(ref, ref, {{"A", "A"}}) == 0.0);
  CHECK(JaccardErrorRate(ref, {}, {{"A", ""}}) == 100.0);
  CHECK(JaccardErrorRate(ref, half, {{"A", "x"}}) == doctest::Approx(50.0));
  CHECK(ScoreRecording(ref, half).jer == doctest::Approx(50.0));
}

TEST_CASE("corpus scoring sums times across recordings") {
  const SegmentList ref = {{"r1", "A", 0, 10}, {"r2", "B", 0, 10}};
  const SegmentList hyp = {{"r1", "a", 0, 10}, {"r2", "b", 0, 5}};
  const CorpusScore c = ScoreCorpus(ref, hyp, 0.0);
  REQUIRE(c.recordings.size() == 2);
  CHECK(c.recordings[0].der == 0.0);
  CHECK(c.recordings[1].der == doctest::Approx(50.0));
  CHECK(c.total.der == doctest::Approx(25.0));
  CHECK(c.total.jer == doctest::Approx(25.0));
  const std::string table = FormatScoreTable(c);
  CHECK(table.find("TOTAL") != std::string::npos);
  CHECK(table.find("25.00") != std::string::npos);
  CHECK(FormatScoreJson(c).find("\"der\": 25.0") != std::string::npos);
}

TEST_CASE("rttm: round trip, errors, empty input") {
  std::mt19937_64 rng(4);
  const SegmentList segs = RandomSegments(rng, 4, "spk", 60.0);
  const SegmentList back = ParseRttm(RttmString(segs));
  REQUIRE(back.size() == segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(back[i].speaker == segs[i].speaker);
    CHECK(back[i].recording == segs[i].recording);
    CHECK(std::abs(back[i].onset - segs[i].onset) < 5e-4);
    CHECK(std::abs(back[i].offset - segs[i].offset) < 1e-3);
  }
  CHECK(RttmString(back) == RttmString(segs));
  CHECK(ParseRttm("").empty());

  const std::string bad = "SPEAKER r 1 0.000 1.000 <NA> <NA> A <NA> <NA>\n"
                          "SPEAKER r 1 2.000 1.x00 <NA> <NA> A <NA> <NA>\n";
  try {
    ParseRttm(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::vector<std::string> warnings;
  const SegmentList mixed = ParseRttm("SPKR-INFO r 1 <NA> <NA> <NA> unknown A <NA> <NA>\n"
                                      "SPEAKER r 1 0.5 1.0 <NA> <NA> A <NA> <NA>\n",
                                      &warnings);
  CHECK(mixed.size() == 1);
  CHECK(warnings.size() == 1);
  CHECK(RttmString({{"rec", "B", 1.0, 2.5}}) == "SPEAKER rec 1 1.000 1.500 <NA> <NA> B <NA> <NA>\n");
}

TEST_CASE("segments to frames rasterizes frame centers") {
  const Matrix y = SegmentsToFrames({{"r", "A", 1.0, 2.0}}, {"A"}, 0.1, 30);
  for (std::size_t t = 0; t < 30; ++t) CHECK(y(t, 0) == (t >= 10 && t < 20 ? 1.0 : 0.0));
}

TEST_CASE("proxy speaker labels: nearest corpus speaker") {
  std::map<std::string, std::vector<double>> corpus = {{"c1", {0, 0}}, {"c2", {1, 1}}};
  CHECK(ProxySpeakerLabels({{"t", {1, 1}}}, corpus).at("t") == "c2");
  CHECK(ProxySpeakerLabels({{"t", {0.5, 0.5}}}, corpus).at("t") == "c1");  // tie
  CHECK(ProxySpeakerLabels({{"t", {9, 9}}, {"u", {-3, 2}}}, {{"only", {0, 0}}}).at("u") == "only");
  CHECK_THROWS_AS(ProxySpeakerLabels({{"t", {1, 1, 1}}}, corpus), DimensionError);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::map<std::string, std::vector<double>> targets, big;
  for (int i = 0; i < 5; ++i) targets["t" + std::to_string(i)] = {n(rng), n(rng), n(rng)};
  for (int i = 0; i < 20; ++i) big["c" + std::to_string(i)] = {n(rng), n(rng), n(rng)};
  const auto got = ProxySpeakerLabels(targets, big);
  for (const auto& [tid, tv] : targets) {
    std::string best;
    double bd = INFINITY;
    for (const auto& [cid, cv] : big) {
      double d = 0;
      for (int k = 0; k < 3; ++k) d += (tv[k] - cv[k]) * (tv[k] - cv[k]);
      if (d < bd || (d == bd && cid < best)) {
        bd = d;
        best = cid;
      }
    }
    CHECK(got.at(tid) == best);
  }
}

}  // namespace
}  // namespace avdiar
