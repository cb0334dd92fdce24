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


#include "avdiar/vahc.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "avdiar/error.h"
#include "json.hpp"

namespace avdiar {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

double Norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// First grid frame whose center is at or after time `t`.
std::size_t FirstCenterAtOrAfter(double t, double shift) {
  const double k = std::ceil(t / shift - 0.5 - 1e-9);
  return k <= 0.0 ? 0 : static_cast<std::size_t>(k);
}

}  // namespace

void FaceTrack::Validate() const {
  if (track_id.empty()) throw InputError("face track with empty track_id");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!std::isfinite(frames[i].t) || frames[i].t < 0.0) {
      throw InputError("face track " + track_id + ": bad frame time");
    }
    if (i > 0 && !(frames[i].t > frames[i - 1].t)) {
      throw InputError("face track " + track_id + ": frame times not strictly increasing");
    }
  }
  if (embeddings.empty()) throw InputError("face track " + track_id + " has no embeddings");
  for (const auto& e : embeddings) {
    if (e.empty() || e.size() != embeddings[0].size()) {
      throw DimensionError("face track " + track_id + ": embeddings of unequal length");
    }
  }
}

FaceTrackSet ParseFaceTracks(std::string_view text) {
  FaceTrackSet tracks;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "face tracks line " + std::to_string(line_no) + ": ";
    FaceTrack track;
    try {
      const json j = json::parse(line);
      track.track_id = j.at("track_id").get<std::string>();
      for (const auto& f : j.at("frames")) {
        const json& a = f.at("active");
        const bool active = a.is_boolean() ? a.get<bool>() : a.get<int>() != 0;
        track.frames.push_back({f.at("t").get<double>(), active});
      }
      track.embeddings = j.at("embeddings").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
    try {
      track.Validate();
    } catch (const Error& e) {
      throw ParseError(where + e.what());
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

FaceTrackSet ReadFaceTracks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open face tracks " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseFaceTracks(buf.str());
}

std::string FaceTracksToJsonl(const FaceTrackSet& tracks) {
  std::string out;
  for (const FaceTrack& t : tracks) {
    ordered_json j;
    j["track_id"] = t.track_id;
    j["frames"] = ordered_json::array();
    for (const FaceFrame& f : t.frames) {
      ordered_json fr;
      fr["t"] = f.t;
      fr["active"] = f.active ? 1 : 0;
      j["frames"].push_back(std::move(fr));
    }
    j["embeddings"] = t.embeddings;
    out += j.dump() + "\n";
  }
  return out;
}

void WriteFaceTracks(const std::filesystem::path& path, const FaceTrackSet& tracks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << FaceTracksToJsonl(tracks);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<double> TrackEmbedding(const FaceTrack& track, std::mt19937_64& rng, std::size_t max_frames) {
  track.Validate();
  const std::size_t n = track.embeddings.size();
  const std::size_t take = std::min(n, std::max<std::size_t>(1, max_frames));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first `take` entries are the sample.
  for (std::size_t i = 0; i < take && take < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<double> mean(track.embeddings[0].size(), 0.0);
  for (std::size_t i = 0; i < take; ++i) {
    const auto& e = track.embeddings[idx[i]];
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += e[d];
  }
  const double norm = Norm(mean);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InputError("face track " + track.track_id + ": embedding mean has zero norm");
  }
  for (double& x : mean) x /= norm;
  return mean;
}

ClusterResult AhcCluster(const std::vector<std::string>& track_ids,
                         const std::vector<std::vector<double>>& embeddings, double threshold) {
  if (track_ids.size() != embeddings.size()) {
    throw DimensionError("ahc: " + std::to_string(track_ids.size()) + " ids for " +
                         std::to_string(embeddings.size()) + " embeddings");
  }
  const std::size_t n = track_ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return track_ids[a] < track_ids[b]; });
  ClusterResult result;
  for (std::size_t i = 0; i < n; ++i) {
    result.track_ids.push_back(track_ids[order[i]]);
    if (i > 0 && result.track_ids[i] == result.track_ids[i - 1]) {
      throw InputError("ahc: duplicate track id " + result.track_ids[i]);
    }
  }
  std::vector<std::vector<double>> unit(n);
  for (std::size_t i = 0; i < n; ++i) {
    unit[i] = embeddings[order[i]];
    if (unit[i].size() != unit[0].size()) throw DimensionError("ahc: embeddings of unequal length");
    const double norm = Norm(unit[i]);
    if (!(norm > 0.0)) throw InputError("ahc: zero embedding for track " + result.track_ids[i]);
    for (double& x : unit[i]) x /= norm;
  }
  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < unit[i].size(); ++d) dot += unit[i][d] * unit[j][d];
      dist(i, j) = dist(j, i) = -dot;
    }
  }
  // A cluster lives at the index of its smallest member, so scanning i < j
  // in order visits candidate pairs lexicographically by track id.
  std::vector<std::size_t> owner(n), size(n, 1);
  std::iota(owner.begin(), owner.end(), 0);
  std::vector<bool> alive(n, true);
  for (std::size_t live = n; live > 1; --live) {
    double best = 0.0;
    std::size_t bi = n, bj = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && (bi == n || dist(i, j) < best)) {
          best = dist(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (best > threshold) break;
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double d = (size[bi] * dist(bi, k) + size[bj] * dist(bj, k)) / static_cast<double>(size[bi] + size[bj]);
      dist(bi, k) = dist(k, bi) = d;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    for (std::size_t& o : owner) {
      if (o == bj) o = bi;
    }
  }
  std::map<std::size_t, int> label_of;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = label_of.emplace(owner[i], static_cast<int>(label_of.size()));
    result.labels.push_back(it->second);
  }
  result.num_clusters = static_cast<int>(label_of.size());
  return result;
}

std::vector<double> RasterizeTrack(const FaceTrack& track, double frame_shift_s, std::size_t frames) {
  if (!(frame_shift_s > 0.0)) throw ContractError("frame shift must be > 0");
  std::vector<double> out(frames, 0.0);
  const auto& f = track.frames;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i].active) continue;
    double end = 0.0;
    if (i + 1 < f.size()) {
      end = f[i + 1].t;
    } else {
      end = f[i].t + (i > 0 ? f[i].t - f[i - 1].t : kDefaultFaceFrameS);
    }
    const std::size_t lo = FirstCenterAtOrAfter(f[i].t, frame_shift_s);
    const std::size_t hi = std::min(frames, FirstCenterAtOrAfter(end, frame_shift_s));
    for (std::size_t k = lo; k < hi; ++k) out[k] = 1.0;
  }
  return out;
}

ActivityMatrix ClustersToStreams(const ClusterResult& clusters, const FaceTrackSet& tracks,
                                 double frame_shift_s, std::size_t frames) {
  ActivityMatrix out;
  out.frame_shift_s = frame_shift_s;
  out.probs = Matrix(frames, static_cast<std::size_t>(clusters.num_clusters));
  std::map<std::string, int> label;
  for (std::size_t i = 0; i < clusters.track_ids.size(); ++i) label[clusters.track_ids[i]] = clusters.labels[i];
  for (const FaceTrack& t : tracks) {
    auto it = label.find(t.track_id);
    if (it == label.end()) throw InputError("track " + t.track_id + " has no cluster");
    const std::vector<double> r = RasterizeTrack(t, frame_shift_s, frames);
    for (std::size_t k = 0; k < frames; ++k) {
      if (r[k] > 0.0) out.probs(k, static_cast<std::size_t>(it->second)) = 1.0;
    }
  }
  return out;
}

VahcResult RunVahc(const FaceTrackSet& tracks, double threshold, std::uint64_t seed, double frame_shift_s,
                   std::size_t frames) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> emb;
  // One stream per track id so results do not depend on file order.
  std::vector<const FaceTrack*> sorted;
  for (const auto& t : tracks) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](const FaceTrack* a, const FaceTrack* b) { return a->track_id < b->track_id; });
  std::mt19937_64 rng(seed);
  for (const FaceTrack* t : sorted) {
    ids.push_back(t->track_id);
    emb.push_back(TrackEmbedding(*t, rng));
  }
  VahcResult r;
  r.clusters = AhcCluster(ids, emb, threshold);
  r.streams = ClustersToStreams(r.clusters, tracks, frame_shift_s, frames);
  return r;
}

FaceTrackSet GenerateTracks(const SegmentList& segments, const TrackGenConfig& c) {
  if (!(c.fps > 0.0) || c.embedding_dim < 1 || c.pad_s < 0.0) throw ConfigError("track generator: bad settings");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t dim = static_cast<std::size_t>(c.embedding_dim);
  auto random_vec = [&](double scale) {
    std::vector<double> v(dim);
    for (double& x : v) x = gauss(rng) * scale;
    return v;
  };
  std::map<std::string, std::vector<double>> identity;
  std::map<std::string, bool> visible;
  for (const std::string& spk : SpeakerOrder(segments)) {
    std::vector<double> v = random_vec(1.0);
    const double n = Norm(v);
    for (double& x : v) x /= n;
    identity[spk] = v;
    visible[spk] = unif(rng) < c.speaker_visible_prob;
  }
  SegmentList sorted = segments;
  SortSegments(sorted);
  std::map<std::string, int> count;
  FaceTrackSet tracks;
  const double step = 1.0 / c.fps;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const Segment& s : sorted) {
    if (!visible[s.speaker] || unif(rng) >= c.segment_visible_prob) continue;
    FaceTrack t;
    t.track_id = s.speaker + "_" + std::to_string(count[s.speaker]++);
    std::vector<double> base = identity[s.speaker];
    const std::vector<double> offset = random_vec(c.track_noise * scale);
    for (std::size_t d = 0; d < dim; ++d) base[d] += offset[d];
    const double start = std::max(0.0, s.onset - c.pad_s);
    for (std::size_t j = 0;; ++j) {
      const double time = start + static_cast<double>(j) * step;
      if (time >= s.offset + c.pad_s) break;
      bool active = time >= s.onset && time < s.offset;
      if (unif(rng) < c.activity_flip_prob) active = !active;
      t.frames.push_back({time, active});
      std::vector<double> e = random_vec(c.frame_noise * scale);
      for (std::size_t d = 0; d < dim; ++d) e[d] += base[d];
      t.embeddings.push_back(std::move(e));
    }
    if (!t.frames.empty()) tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace avdiar
