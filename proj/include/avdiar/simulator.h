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

// Multi-speaker recording simulator: speaker and utterance sampling with
// silences and overlaps, non-overlapping noise and music events, and
// loudness-targeted mixing.
//
//   SourceCorpus corpus = MakeSyntheticCorpus({});
//   std::mt19937_64 rng(7);
//   PlannedRecording p = SamplePlan(SimConfig{}, corpus, rng, "rec0000");
//   RenderedRecording r = Render(p.plan, SimConfig{}, corpus);

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avdiar/segments.h"
#include "avdiar/wav.h"

namespace avdiar {

struct LufsTargets {
  double speech = -17.0;
  double music = -24.0;
  double fg_noise = -21.0;
  double bg_noise = -29.0;
};

struct SimConfig {
  double n_speakers_mean = 8.0;
  double n_speakers_std = 2.5;
  int n_speakers_min = 2;
  int n_speakers_max = 18;
  double utt_len_mean = 0.0;
  double utt_len_std = 1.5;
  double utt_len_min_s = 0.25;
  double silence_prob = 0.8;
  double silence_mean = 0.25;
  double silence_std = 1.0;
  double silence_min_s = 0.25;
  double overlap_prob = 0.2;
  double overlap_min_s = 0.25;
  double overlap_max_s = 2.0;
  double recording_len_s = 300.0;
  double noise_coverage = 0.5;
  double music_coverage = 0.5;
  double event_min_s = 2.0;
  double event_max_s = 10.0;
  double foreground_noise_prob = 0.5;
  LufsTargets lufs_targets;
  double recording_jitter = 2.0;
  double clip_jitter = 1.0;
  double fade_s = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void Validate() const;
  // Unknown keys raise ConfigError; missing keys keep their defaults.
  static SimConfig FromJson(std::string_view text);
  std::string ToJson() const;
};

struct ClipRef {
  std::string id;
  std::filesystem::path path;  // empty for synthetic clips
  double duration_s = 0.0;
};

struct SourceCorpus {
  std::vector<std::string> speakers;  // sorted
  std::map<std::string, std::vector<ClipRef>> speech;
  std::vector<ClipRef> noise;
  std::vector<ClipRef> music;
  // All speaker ids of the corpus the speakers were drawn from, sorted;
  // class index of a speaker is its position here plus one.
  std::vector<std::string> class_table;
  // Produces the samples of a clip; file corpora read the WAV.
  std::function<Waveform(const ClipRef&)> loader;

  Waveform Load(const ClipRef& clip) const { return loader(clip); }
  // 1-based class index, 0 when unknown.
  std::size_t ClassIndex(const std::string& speaker) const;
};

struct SyntheticCorpusConfig {
  int n_speakers = 24;
  int clips_per_speaker = 3;
  double clip_min_s = 6.0;
  double clip_max_s = 12.0;
  int n_noise = 6;
  int n_music = 4;
  double background_len_s = 12.0;
  std::uint64_t seed = 1;
};

// Speakers get distinct harmonic voices (pitch, formants, syllable rhythm);
// noise clips are shaped noise, music clips are note sequences. Audio is
// synthesized on demand from the clip id, so construction is cheap.
SourceCorpus MakeSyntheticCorpus(const SyntheticCorpusConfig& config);

// `dir/<speaker-id>/*.wav`; the reserved directories `_noise` and `_music`
// hold background clips.
SourceCorpus ScanCorpusDirectory(const std::filesystem::path& dir);

// {"speakers": {"<id>": ["a.wav", ...]}, "noise": [...], "music": [...]};
// relative paths resolve against the index file's directory.
SourceCorpus LoadCorpusIndex(const std::filesystem::path& json_path);

// Partitions speakers into disjoint train and test corpora (seeded); both
// keep the background clips and the full class table.
std::pair<SourceCorpus, SourceCorpus> SplitCorpus(const SourceCorpus& corpus, double test_fraction,
                                                  std::uint64_t seed);

enum class JointKind { kFirst, kSilence, kOverlap, kAbut };
enum class BackgroundClass { kMusic, kForegroundNoise, kBackgroundNoise };

const char* JointKindName(JointKind kind);
const char* BackgroundClassName(BackgroundClass cls);

struct UtteranceEvent {
  std::string speaker;
  ClipRef clip;
  double source_offset_s = 0.0;
  double start_s = 0.0;
  double duration_s = 0.0;
  double target_lufs = 0.0;
  // How this utterance joins the previous one.
  JointKind joint = JointKind::kFirst;
  double joint_s = 0.0;  // silence length or overlap length
};

struct BackgroundEvent {
  BackgroundClass cls = BackgroundClass::kBackgroundNoise;
  ClipRef clip;
  double source_offset_s = 0.0;  // background clips loop past their end
  double start_s = 0.0;
  double duration_s = 0.0;
  double target_lufs = 0.0;
};

struct MixPlan {
  std::string recording_id;
  double length_s = 0.0;
  std::vector<std::string> speakers;  // selected for the recording
  std::vector<UtteranceEvent> utterances;
  std::vector<BackgroundEvent> noise;
  std::vector<BackgroundEvent> music;
  LufsTargets recording_lufs;  // per-class levels drawn for this recording
};

struct PlannedRecording {
  MixPlan plan;
  SegmentList segments;  // one per utterance, sorted by onset
};

// Clipped, rounded normal speaker count. Throws ConfigError when the corpus
// has fewer than n_speakers_max speakers or lacks background clips that
// the configured coverage needs. Times are on a 1 ms grid.
PlannedRecording SamplePlan(const SimConfig& config, const SourceCorpus& corpus, std::mt19937_64& rng,
                            const std::string& recording_id);

// Largest number of utterances active at once (sweep line).
int MaxConcurrentSpeakers(const MixPlan& plan);
// Fraction of the recording covered by the events.
double Coverage(const std::vector<BackgroundEvent>& events, double length_s);

struct RenderedRecording {
  Waveform audio;
  SegmentList segments;
  // Gain applied to each utterance, then each noise and music event.
  std::vector<double> gain_db;
  bool limited = false;
};

// Crop (looping if needed), then linear fades; the building block of a
// rendered event before its gain.
std::vector<double> PrepareClip(const Waveform& source, double offset_s, double duration_s,
                                double fade_s, bool loop);

// Loudness used to set a clip's gain: the prepared crop, or the whole
// source when the crop is shorter than one 400 ms block. Empty if silent.
std::optional<double> ClipLoudness(const std::vector<double>& prepared, const Waveform& source);

// Identity up to |x| = 0.9, then a smooth knee that stays below 1.
double SoftLimit(double x);

// Mixes every event at its target loudness. The limiter runs only when the
// mix peaks above 1. Unreadable sources raise IoError naming the file.
RenderedRecording Render(const MixPlan& plan, const SimConfig& config, const SourceCorpus& corpus);

struct ManifestEntry {
  std::string recording_id;
  std::string wav;  // paths relative to the manifest directory
  std::string rttm;
  std::string labels;
  std::vector<std::string> speakers;
  double duration_s = 0.0;
};

// Writes wav/<id>.wav (float32), rttm/<id>.rttm, labels/<id>.txt
// ("<speaker> <class>" per line), plans/<id>.json and manifest.json.
// Recording i uses an RNG seeded from (config.seed, i). n_recordings = 0
// writes an empty manifest only.
std::vector<ManifestEntry> EmitDataset(const SimConfig& config, const SourceCorpus& corpus,
                                       int n_recordings, const std::filesystem::path& out_dir,
                                       const std::string& prefix = "rec");

std::vector<ManifestEntry> ReadManifest(const std::filesystem::path& path);
std::string ManifestToJson(const std::vector<ManifestEntry>& entries);
std::string MixPlanToJson(const MixPlan& plan);

// Per-recording speaker class labels ("<speaker> <class>" lines).
std::map<std::string, std::size_t> ReadSpeakerLabels(const std::filesystem::path& path);

// Independent stream for recording `index`.
std::mt19937_64 RecordingRng(std::uint64_t seed, std::uint64_t index);

}  // namespace avdiar
