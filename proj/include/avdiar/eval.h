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

// Binarization of activity matrices and diarization scoring: DER with a
// no-score collar around reference boundaries, decomposed into missed
// speech, false alarm and speaker error, plus the Jaccard error rate.

#include <map>
#include <string>
#include <vector>

#include "avdiar/activity.h"
#include "avdiar/segments.h"

namespace avdiar {

// Thresholds every stream, applies a binary median filter of odd width
// (edge-replicated) and turns runs of active frames into segments labeled
// `speaker_prefix` + stream index.
SegmentList Binarize(const ActivityMatrix& activity, double threshold, int median_frames,
                     const std::string& recording, const std::string& speaker_prefix = "spk");

// Error durations in seconds over the scored region.
struct ErrorTimes {
  double scored_speech = 0.0;  // Σ reference speakers active
  double missed = 0.0;
  double false_alarm = 0.0;
  double speaker_error = 0.0;
};

struct ScoreReport {
  std::string recording;
  ErrorTimes times;
  // Percentages of scored reference speech.
  double ms = 0.0, fa = 0.0, se = 0.0, der = 0.0, jer = 0.0;
  // False when the reference has no speech left after collaring.
  bool scorable = true;
  // reference speaker -> hypothesis speaker ("" when unmapped).
  std::map<std::string, std::string> mapping;
};

// Percentages from accumulated times; der is ms + fa + se.
ScoreReport ReportFromTimes(const ErrorTimes& times);

// Scores one recording; segments of other recordings are ignored only by
// the caller. Overlapping segments of one speaker are merged first.
ScoreReport ScoreRecording(const SegmentList& ref, const SegmentList& hyp, double collar_s = 0.25);

// JER in percent: mean over reference speakers of 1 - |R ∩ H| / |R ∪ H|
// against the mapped hypothesis speaker, 100 for an unmapped one. No
// collar. Returns 0 when the reference has no speakers.
double JaccardErrorRate(const SegmentList& ref, const SegmentList& hyp,
                        const std::map<std::string, std::string>& mapping);

struct CorpusScore {
  std::vector<ScoreReport> recordings;
  // Times summed over scorable recordings; JER averaged over all of their
  // reference speakers.
  ScoreReport total;
};

// Groups both lists by recording id and scores every reference recording.
CorpusScore ScoreCorpus(const SegmentList& ref, const SegmentList& hyp, double collar_s = 0.25);

// Aligned text table, one row per recording plus a TOTAL row.
std::string FormatScoreTable(const CorpusScore& score);
std::string FormatScoreJson(const CorpusScore& score);

// Each target speaker mapped to the corpus speaker with the smallest L2
// distance; ties go to the lexicographically smallest corpus id.
std::map<std::string, std::string> ProxySpeakerLabels(
    const std::map<std::string, std::vector<double>>& targets,
    const std::map<std::string, std::vector<double>>& corpus);

}  // namespace avdiar
