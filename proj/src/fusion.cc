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


#include "avdiar/fusion.h"

#include <cmath>
#include <string>

#include "avdiar/assignment.h"
#include "avdiar/error.h"

namespace avdiar {
namespace {

void CheckTimeline(const ActivityMatrix& audio, const ActivityMatrix& visual) {
  const double a = audio.frame_shift_s, v = visual.frame_shift_s;
  if (std::abs(a - v) > 1e-9 * std::max(std::abs(a), std::abs(v))) {
    throw ContractError("fusion: audio frame shift " + std::to_string(a) + " s, visual " + std::to_string(v) + " s");
  }
  if (audio.num_frames() != visual.num_frames()) {
    throw DimensionError("fusion: audio has " + std::to_string(audio.num_frames()) + " frames, visual " +
                         std::to_string(visual.num_frames()));
  }
}

bool On(double x) { return x >= 0.5; }

}  // namespace

StreamMatch MatchStreams(const ActivityMatrix& audio, const ActivityMatrix& visual) {
  CheckTimeline(audio, visual);
  const std::size_t s = audio.num_streams(), v = visual.num_streams(), t_max = audio.num_frames();
  StreamMatch m;
  m.scores = Matrix(s, v);
  m.visual_to_audio.assign(v, kUnassigned);
  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < v; ++j) {
    bool any = false;
    for (std::size_t t = 0; t < t_max; ++t) {
      if (!On(visual.probs(t, j))) continue;
      any = true;
      for (std::size_t i = 0; i < s; ++i) m.scores(i, j) += audio.probs(t, i);
    }
    if (any) live.push_back(j);
  }
  if (s == 0 || live.empty()) return m;
  Matrix cost(live.size(), s);
  for (std::size_t r = 0; r < live.size(); ++r) {
    for (std::size_t i = 0; i < s; ++i) cost(r, i) = -m.scores(i, live[r]);
  }
  const Assignment a = SolveAssignment(cost);
  for (std::size_t r = 0; r < live.size(); ++r) m.visual_to_audio[live[r]] = a.row_to_col[r];
  return m;
}

ActivityMatrix FuseScores(const ActivityMatrix& audio, const ActivityMatrix& visual, const StreamMatch& match,
                          bool mute_others) {
  CheckTimeline(audio, visual);
  const std::size_t s = audio.num_streams(), v = visual.num_streams(), t_max = audio.num_frames();
  if (match.visual_to_audio.size() != v) throw DimensionError("fusion: mapping does not match visual streams");
  std::vector<std::size_t> column(v, kUnassigned);
  std::size_t extra = 0;
  for (std::size_t j = 0; j < v; ++j) {
    const std::size_t a = match.visual_to_audio[j];
    if (a != kUnassigned) {
      if (a >= s) throw DimensionError("fusion: mapping points past the audio streams");
      column[j] = a;
      continue;
    }
    bool any = false;
    for (std::size_t t = 0; t < t_max && !any; ++t) any = On(visual.probs(t, j));
    if (any) column[j] = s + extra++;
  }
  ActivityMatrix out;
  out.frame_shift_s = audio.frame_shift_s;
  out.probs = Matrix(t_max, s + extra);
  for (std::size_t t = 0; t < t_max; ++t) {
    for (std::size_t i = 0; i < s; ++i) out.probs(t, i) = audio.probs(t, i);
    std::size_t active = 0, only = kUnassigned;
    for (std::size_t j = 0; j < v; ++j) {
      if (column[j] == kUnassigned || !On(visual.probs(t, j))) continue;
      out.probs(t, column[j]) = 1.0;
      ++active;
      only = column[j];
    }
    if (mute_others && active == 1) {
      for (std::size_t c = 0; c < out.num_streams(); ++c) {
        if (c != only) out.probs(t, c) = 0.0;
      }
    }
  }
  return out;
}

ActivityMatrix FuseTracks(const ActivityMatrix& audio, const FaceTrackSet& tracks) {
  ActivityMatrix out = audio;
  const std::size_t s = audio.num_streams(), t_max = audio.num_frames();
  if (s == 0) return out;
  for (const FaceTrack& track : tracks) {
    const std::vector<double> r = RasterizeTrack(track, audio.frame_shift_s, t_max);
    std::vector<double> score(s, 0.0);
    bool any = false;
    for (std::size_t t = 0; t < t_max; ++t) {
      if (r[t] == 0.0) continue;
      any = true;
      for (std::size_t i = 0; i < s; ++i) score[i] += audio.probs(t, i);
    }
    if (!any) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < s; ++i) {
      if (score[i] > score[best]) best = i;
    }
    for (std::size_t t = 0; t < t_max; ++t) {
      if (r[t] != 0.0) out.probs(t, best) = 1.0;
    }
  }
  return out;
}

}  // namespace avdiar
