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


#include "avdiar/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "avdiar/assignment.h"
#include "avdiar/error.h"
#include "json.hpp"

namespace avdiar {
namespace {

using Interval = std::pair<double, double>;

// Sorted, disjoint union of intervals.
std::vector<Interval> Union(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const Interval& iv : v) {
    if (iv.second <= iv.first) continue;
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

double Length(const std::vector<Interval>& v) {
  double total = 0.0;
  for (const auto& [a, b] : v) total += b - a;
  return total;
}

// Both inputs sorted and disjoint.
std::vector<Interval> Intersect(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  std::vector<Interval> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].first, b[j].first);
    const double hi = std::min(a[i].second, b[j].second);
    if (lo < hi) out.push_back({lo, hi});
    if (a[i].second < b[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

// a minus b, both sorted and disjoint.
std::vector<Interval> Subtract(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  std::vector<Interval> out;
  std::size_t j = 0;
  for (auto [lo, hi] : a) {
    while (j < b.size() && b[j].second <= lo) ++j;
    std::size_t k = j;
    while (k < b.size() && b[k].first < hi) {
      if (b[k].first > lo) out.push_back({lo, b[k].first});
      lo = std::max(lo, b[k].second);
      ++k;
    }
    if (lo < hi) out.push_back({lo, hi});
  }
  return out;
}

struct SpeakerTracks {
  std::vector<std::string> names;  // sorted
  std::vector<std::vector<Interval>> support;
};

SpeakerTracks Tracks(const SegmentList& segments) {
  std::map<std::string, std::vector<Interval>> by;
  for (const Segment& s : segments) by[s.speaker].push_back({s.onset, s.offset});
  SpeakerTracks t;
  for (auto& [name, v] : by) {
    t.names.push_back(name);
    t.support.push_back(Union(std::move(v)));
  }
  return t;
}

double Pct(double part, double whole) { return whole > 0.0 ? 100.0 * part / whole : 0.0; }

}  // namespace

SegmentList Binarize(const ActivityMatrix& activity, double threshold, int median_frames,
                     const std::string& recording, const std::string& speaker_prefix) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("threshold must be in (0, 1)");
  if (median_frames < 1 || median_frames % 2 == 0) {
    throw ContractError("median filter width must be a positive odd number");
  }
  const std::size_t frames = activity.num_frames();
  const int half = median_frames / 2;
  SegmentList out;
  std::vector<int> raw(frames), filtered(frames);
  for (std::size_t s = 0; s < activity.num_streams(); ++s) {
    for (std::size_t t = 0; t < frames; ++t) raw[t] = activity.probs(t, s) > threshold ? 1 : 0;
    for (std::size_t t = 0; t < frames; ++t) {
      int on = 0;
      for (int k = -half; k <= half; ++k) {
        const long idx = std::clamp(static_cast<long>(t) + k, 0L, static_cast<long>(frames) - 1);
        on += raw[static_cast<std::size_t>(idx)];
      }
      filtered[t] = on > half ? 1 : 0;
    }
    for (std::size_t t = 0; t < frames;) {
      if (!filtered[t]) {
        ++t;
        continue;
      }
      std::size_t end = t;
      while (end < frames && filtered[end]) ++end;
      out.push_back({recording, speaker_prefix + std::to_string(s),
                     static_cast<double>(t) * activity.frame_shift_s,
                     static_cast<double>(end) * activity.frame_shift_s});
      t = end;
    }
  }
  SortSegments(out);
  return out;
}

ScoreReport ReportFromTimes(const ErrorTimes& times) {
  ScoreReport r;
  r.times = times;
  r.scorable = times.scored_speech > 0.0;
  r.ms = Pct(times.missed, times.scored_speech);
  r.fa = Pct(times.false_alarm, times.scored_speech);
  r.se = Pct(times.speaker_error, times.scored_speech);
  r.der = r.ms + r.fa + r.se;
  return r;
}

ScoreReport ScoreRecording(const SegmentList& ref, const SegmentList& hyp, double collar_s) {
  if (!(collar_s >= 0.0)) throw ContractError("collar must be non-negative");
  const SpeakerTracks r = Tracks(ref), h = Tracks(hyp);

  std::vector<Interval> no_score;
  for (const auto& support : r.support) {
    for (const auto& [a, b] : support) {
      no_score.push_back({a - collar_s, a + collar_s});
      no_score.push_back({b - collar_s, b + collar_s});
    }
  }
  no_score = Union(std::move(no_score));
  auto scored = [&](const std::vector<Interval>& v) { return Subtract(v, no_score); };
  std::vector<std::vector<Interval>> rs, hs;
  for (const auto& v : r.support) rs.push_back(scored(v));
  for (const auto& v : h.support) hs.push_back(scored(v));

  // Mapping maximizes scored overlap; uncollared overlap breaks ties so a
  // speaker hidden by the collar still maps to its counterpart.
  std::vector<std::size_t> ref_to_hyp(r.names.size(), kUnassigned);
  if (!r.names.empty() && !h.names.empty()) {
    double span = 1.0;
    for (const auto& v : r.support) span += Length(v);
    Matrix cost(r.names.size(), h.names.size());
    for (std::size_t i = 0; i < r.names.size(); ++i)
      for (std::size_t j = 0; j < h.names.size(); ++j) {
        cost(i, j) = -Length(Intersect(rs[i], hs[j])) -
                     1e-6 / span * Length(Intersect(r.support[i], h.support[j]));
      }
    const Assignment a = SolveAssignment(cost);
    for (std::size_t i = 0; i < r.names.size(); ++i) {
      // A pair with no shared time is not a mapping.
      if (a.row_to_col[i] != kUnassigned && cost(i, a.row_to_col[i]) < 0.0) {
        ref_to_hyp[i] = a.row_to_col[i];
      }
    }
  }

  // Elementary intervals between all boundaries.
  std::set<double> cuts;
  for (const auto* group : {&rs, &hs})
    for (const auto& v : *group)
      for (const auto& [a, b] : v) {
        cuts.insert(a);
        cuts.insert(b);
      }
  const std::vector<double> points(cuts.begin(), cuts.end());
  ErrorTimes times;
  std::vector<std::size_t> ri(rs.size(), 0), hi(hs.size(), 0);
  auto active = [](const std::vector<Interval>& v, std::size_t& cursor, double mid) {
    while (cursor < v.size() && v[cursor].second <= mid) ++cursor;
    return cursor < v.size() && v[cursor].first <= mid;
  };
  std::vector<char> ref_on(rs.size()), hyp_on(hs.size());
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const double dur = points[k + 1] - points[k];
    if (dur <= 0.0) continue;
    const double mid = 0.5 * (points[k] + points[k + 1]);
    int n_ref = 0, n_hyp = 0, n_correct = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) n_ref += (ref_on[i] = active(rs[i], ri[i], mid));
    for (std::size_t j = 0; j < hs.size(); ++j) n_hyp += (hyp_on[j] = active(hs[j], hi[j], mid));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (ref_on[i] && ref_to_hyp[i] != kUnassigned && hyp_on[ref_to_hyp[i]]) ++n_correct;
    }
    times.scored_speech += dur * n_ref;
    times.missed += dur * std::max(0, n_ref - n_hyp);
    times.false_alarm += dur * std::max(0, n_hyp - n_ref);
    times.speaker_error += dur * (std::min(n_ref, n_hyp) - n_correct);
  }

  ScoreReport report = ReportFromTimes(times);
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    report.mapping[r.names[i]] = ref_to_hyp[i] == kUnassigned ? "" : h.names[ref_to_hyp[i]];
  }
  report.jer = JaccardErrorRate(ref, hyp, report.mapping);
  if (!ref.empty()) report.recording = ref.front().recording;
  return report;
}

double JaccardErrorRate(const SegmentList& ref, const SegmentList& hyp,
                        const std::map<std::string, std::string>& mapping) {
  const SpeakerTracks r = Tracks(ref), h = Tracks(hyp);
  if (r.names.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto it = mapping.find(r.names[i]);
    const auto hj = it == mapping.end() || it->second.empty()
                        ? h.names.end()
                        : std::find(h.names.begin(), h.names.end(), it->second);
    if (hj == h.names.end()) {
      total += 1.0;
      continue;
    }
    const auto& hs = h.support[static_cast<std::size_t>(hj - h.names.begin())];
    const double inter = Length(Intersect(r.support[i], hs));
    std::vector<Interval> both = r.support[i];
    both.insert(both.end(), hs.begin(), hs.end());
    const double uni = Length(Union(std::move(both)));
    total += uni > 0.0 ? 1.0 - inter / uni : 0.0;
  }
  return 100.0 * total / static_cast<double>(r.names.size());
}

CorpusScore ScoreCorpus(const SegmentList& ref, const SegmentList& hyp, double collar_s) {
  std::map<std::string, std::pair<SegmentList, SegmentList>> by;
  for (const Segment& s : ref) by[s.recording].first.push_back(s);
  for (const Segment& s : hyp) {
    auto it = by.find(s.recording);
    if (it != by.end()) it->second.second.push_back(s);
  }
  CorpusScore out;
  ErrorTimes sum;
  double jer_sum = 0.0;
  std::size_t n_speakers = 0;
  for (auto& [rec, lists] : by) {
    ScoreReport r = ScoreRecording(lists.first, lists.second, collar_s);
    r.recording = rec;
    if (r.scorable) {
      sum.scored_speech += r.times.scored_speech;
      sum.missed += r.times.missed;
      sum.false_alarm += r.times.false_alarm;
      sum.speaker_error += r.times.speaker_error;
      jer_sum += r.jer * static_cast<double>(r.mapping.size());
      n_speakers += r.mapping.size();
    }
    out.recordings.push_back(std::move(r));
  }
  out.total = ReportFromTimes(sum);
  out.total.recording = "TOTAL";
  out.total.jer = n_speakers ? jer_sum / static_cast<double>(n_speakers) : 0.0;
  return out;
}

std::string FormatScoreTable(const CorpusScore& score) {
  std::size_t width = 9;
  for (const auto& r : score.recordings) width = std::max(width, r.recording.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s %8s %8s\n", int(width), "recording", "MS",
                "FA", "SE", "DER", "JER");
  out += buf;
  auto row = [&](const ScoreReport& r) {
    if (!r.scorable) {
      std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s %8s %8s\n", int(width), r.recording.c_str(),
                    "-", "-", "-", "unscorable", "-");
    } else {
      std::snprintf(buf, sizeof(buf), "%-*s %8.2f %8.2f %8.2f %8.2f %8.2f\n", int(width),
                    r.recording.c_str(), r.ms, r.fa, r.se, r.der, r.jer);
    }
    out += buf;
  };
  for (const auto& r : score.recordings) row(r);
  row(score.total);
  return out;
}

std::string FormatScoreJson(const CorpusScore& score) {
  auto to_json = [](const ScoreReport& r) {
    nlohmann::ordered_json j;
    j["recording"] = r.recording;
    j["scorable"] = r.scorable;
    j["ms"] = r.ms;
    j["fa"] = r.fa;
    j["se"] = r.se;
    j["der"] = r.der;
    j["jer"] = r.jer;
    j["scored_speech_s"] = r.times.scored_speech;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.mapping) m[k] = v;
    j["mapping"] = m;
    return j;
  };
  nlohmann::ordered_json j;
  j["recordings"] = nlohmann::ordered_json::array();
  for (const auto& r : score.recordings) j["recordings"].push_back(to_json(r));
  j["total"] = to_json(score.total);
  return j.dump(2) + "\n";
}

std::map<std::string, std::string> ProxySpeakerLabels(
    const std::map<std::string, std::vector<double>>& targets,
    const std::map<std::string, std::vector<double>>& corpus) {
  if (corpus.empty()) throw ContractError("proxy labels need at least one corpus speaker");
  std::map<std::string, std::string> out;
  for (const auto& [tid, tv] : targets) {
    double best = std::numeric_limits<double>::infinity();
    const std::string* best_id = nullptr;
    for (const auto& [cid, cv] : corpus) {
      if (cv.size() != tv.size()) {
        throw DimensionError("embedding of '" + tid + "' has " + std::to_string(tv.size()) +
                             " dims, corpus speaker '" + cid + "' has " + std::to_string(cv.size()));
      }
      double d = 0.0;
      for (std::size_t k = 0; k < tv.size(); ++k) d += (tv[k] - cv[k]) * (tv[k] - cv[k]);
      if (d < best) {
        best = d;
        best_id = &cid;
      }
    }
    out[tid] = *best_id;
  }
  return out;
}

}  // namespace avdiar
