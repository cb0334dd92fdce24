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

// Score-level late fusion of audio activity with visual streams: streams
// are paired by the audio score summed over visually active frames, the
// paired audio score is replaced by 1 where the visual stream is active,
// and unpaired visual streams join as new speakers.

#include <vector>

#include "avdiar/activity.h"
#include "avdiar/vahc.h"

namespace avdiar {

struct StreamMatch {
  Matrix scores;  // S x S', audio by visual
  // visual_to_audio[v] is the paired audio stream or kUnassigned.
  std::vector<std::size_t> visual_to_audio;
};

// score(s, v) = sum_t audio(t, s) * [visual(t, v) = 1]; min(S, S') pairs
// maximizing the total. Visual streams without any active frame stay
// unpaired. Frame-shift mismatch raises ContractError, frame-count
// mismatch DimensionError.
StreamMatch MatchStreams(const ActivityMatrix& audio, const ActivityMatrix& visual);

// Output has S plus one column per unpaired, ever-active visual stream.
// With mute_others, frames where exactly one visual stream is active keep
// only that stream's column.
ActivityMatrix FuseScores(const ActivityMatrix& audio, const ActivityMatrix& visual,
                          const StreamMatch& match, bool mute_others);

// Track-level variant: each track goes to its best audio stream (argmax,
// lowest index on ties, no one-to-one constraint) and overwrites it with
// 1 on its active frames. Column count is unchanged.
ActivityMatrix FuseTracks(const ActivityMatrix& audio, const FaceTrackSet& tracks);

}  // namespace avdiar
