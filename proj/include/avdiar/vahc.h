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

// Visual clustering branch: face tracks with ingested active-speaker marks
// and face embeddings are clustered with average-linkage AHC on negative
// cosine similarity, and each cluster becomes one binary activity stream.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "avdiar/activity.h"
#include "avdiar/segments.h"

namespace avdiar {

// Span of a track's last frame when it has only one (25 fps video).
inline constexpr double kDefaultFaceFrameS = 0.04;

struct FaceFrame {
  double t = 0.0;
  bool active = false;
};

struct FaceTrack {
  std::string track_id;
  std::vector<FaceFrame> frames;  // strictly increasing times
  std::vector<std::vector<double>> embeddings;

  // Throws InputError (empty id, unordered times, no embeddings) or
  // DimensionError (ragged embeddings).
  void Validate() const;
};

using FaceTrackSet = std::vector<FaceTrack>;

// JSON lines: {"track_id": str, "frames": [{"t": s, "active": 0|1}],
// "embeddings": [[...], ...]}. Blank lines are skipped; errors name the line.
FaceTrackSet ParseFaceTracks(std::string_view text);
FaceTrackSet ReadFaceTracks(const std::filesystem::path& path);
std::string FaceTracksToJsonl(const FaceTrackSet& tracks);
void WriteFaceTracks(const std::filesystem::path& path, const FaceTrackSet& tracks);

// Mean of up to `max_frames` embeddings drawn without replacement, then
// L2-normalized. A zero mean raises InputError.
std::vector<double> TrackEmbedding(const FaceTrack& track, std::mt19937_64& rng,
                                   std::size_t max_frames = 50);

inline constexpr double kDefaultAhcThreshold = -0.5;

struct ClusterResult {
  std::vector<std::string> track_ids;  // sorted
  std::vector<int> labels;             // parallel to track_ids
  int num_clusters = 0;
};

// Average linkage on d = -cos(u, v), merging while the smallest linkage is
// <= threshold. Inputs are sorted by id first and ties go to the
// lexicographically smallest pair, so the result ignores input order.
// Labels are numbered by each cluster's smallest track id.
ClusterResult AhcCluster(const std::vector<std::string>& track_ids,
                         const std::vector<std::vector<double>>& embeddings,
                         double threshold = kDefaultAhcThreshold);

// Binary T x 1 raster of one track. Face frame i covers [t_i, t_{i+1});
// the last frame repeats the previous spacing. Grid frame k is set when its
// center falls inside an active face frame.
std::vector<double> RasterizeTrack(const FaceTrack& track, double frame_shift_s, std::size_t frames);

// Cluster column = OR over its member tracks; no face data means 0.
ActivityMatrix ClustersToStreams(const ClusterResult& clusters, const FaceTrackSet& tracks,
                                 double frame_shift_s, std::size_t frames);

struct VahcResult {
  ClusterResult clusters;
  ActivityMatrix streams;
};

// Embedding, clustering and streams in one call; `seed` drives sampling.
VahcResult RunVahc(const FaceTrackSet& tracks, double threshold, std::uint64_t seed,
                   double frame_shift_s, std::size_t frames);

struct TrackGenConfig {
  double speaker_visible_prob = 1.0;  // speaker appears on screen at all
  double segment_visible_prob = 1.0;  // a visible speaker's segment is filmed
  double fps = 25.0;
  double pad_s = 0.5;             // silent face time around each segment
  double activity_flip_prob = 0.0;  // per-frame detector errors
  int embedding_dim = 64;
  double track_noise = 0.15;  // per-track offset from the speaker identity
  double frame_noise = 0.3;   // per-frame jitter
  std::uint64_t seed = 0;
};

// One face track per filmed reference segment, active over the segment and
// silent over the padding. Each speaker has a random identity direction.
// Track ids are "<speaker>_<n>".
FaceTrackSet GenerateTracks(const SegmentList& segments, const TrackGenConfig& config);

}  // namespace avdiar
