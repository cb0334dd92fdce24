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


#include "avdiar/simulator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "avdiar/error.h"
#include "avdiar/loudness.h"
#include "json.hpp"

namespace avdiar {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kPi = std::numbers::pi;

// Plans live on a millisecond grid so that RTTM text and plan agree.
std::int64_t ToMs(double s) { return static_cast<std::int64_t>(std::llround(s * 1000.0)); }
std::int64_t FloorMs(double s) { return static_cast<std::int64_t>(std::floor(s * 1000.0 + 1e-9)); }
double FromMs(std::int64_t ms) { return static_cast<double>(ms) / 1000.0; }

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double Normal(std::mt19937_64& rng, double mean, double std) {
  if (std <= 0.0) return mean;
  return std::normal_distribution<double>(mean, std)(rng);
}

template <typename T>
const T& Pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

// Normal restricted to [min, inf) by rejection; falls back to `min` if the
// tail is too thin to hit.
double TruncatedNormal(std::mt19937_64& rng, double mean, double std, double min) {
  for (int tries = 0; tries < 1000; ++tries) {
    const double x = Normal(rng, mean, std);
    if (x >= min) return x;
  }
  return min;
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("simulator: " + what);
}

// ---- synthetic sources -----------------------------------------------------

std::mt19937_64 Stream(std::uint64_t seed, std::uint64_t kind, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

struct Voice {
  double f0 = 120.0;
  double formant[3] = {500.0, 1500.0, 2500.0};
  double bandwidth[3] = {90.0, 120.0, 180.0};
  double syllable_s = 0.25;
  double breath = 0.03;
  double tilt = 0.6;
};

Voice MakeVoice(std::uint64_t seed, int speaker, int n_speakers) {
  std::mt19937_64 rng = Stream(seed, 1, speaker);
  Voice v;
  // Spread pitches over the range so neighbours differ audibly.
  const double golden = 0.6180339887498949;
  const double pos = std::fmod(speaker * golden + Uniform(rng, 0.0, 0.5 / std::max(1, n_speakers)), 1.0);
  v.f0 = 85.0 * std::pow(250.0 / 85.0, pos);
  v.formant[0] = Uniform(rng, 350.0, 850.0);
  v.formant[1] = Uniform(rng, 950.0, 2300.0);
  v.formant[2] = Uniform(rng, 2400.0, 3400.0);
  v.bandwidth[0] = Uniform(rng, 60.0, 130.0);
  v.bandwidth[1] = Uniform(rng, 90.0, 180.0);
  v.bandwidth[2] = Uniform(rng, 120.0, 260.0);
  v.syllable_s = Uniform(rng, 0.16, 0.32);
  v.breath = Uniform(rng, 0.01, 0.06);
  v.tilt = Uniform(rng, 0.3, 1.0);
  return v;
}

void NormalizePeak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double s : x) m = std::max(m, std::abs(s));
  if (m > 0.0) {
    for (double& s : x) s *= peak / m;
  }
}

std::vector<double> SynthesizeSpeech(const Voice& voice, std::mt19937_64& rng, std::size_t n) {
  std::vector<double> out(n, 0.0);
  const double fs = kSampleRate;
  std::size_t pos = static_cast<std::size_t>(Uniform(rng, 0.0, 0.03) * fs);
  std::vector<double> amp;
  while (pos < n) {
    const std::size_t len =
        static_cast<std::size_t>(voice.syllable_s * Uniform(rng, 0.6, 1.4) * fs);
    const double f0 = voice.f0 * std::exp(Normal(rng, 0.0, 0.06));
    const double glide = Normal(rng, 0.0, 0.08);
    double formant[3];
    for (int i = 0; i < 3; ++i) formant[i] = voice.formant[i] * std::exp(Normal(rng, 0.0, 0.08));
    const int k_max = std::max(1, static_cast<int>(3800.0 / f0));
    amp.assign(k_max + 1, 0.0);
    for (int k = 1; k <= k_max; ++k) {
      const double f = k * f0;
      double a = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double r = (f - formant[i]) / voice.bandwidth[i];
        a += 1.0 / (1.0 + r * r) / (1.0 + i);
      }
      amp[k] = (0.05 + a) / std::pow(static_cast<double>(k), voice.tilt);
    }
    double phase = Uniform(rng, 0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double env = std::pow(std::sin(kPi * u), 0.7);
      const double f = f0 * (1.0 + glide * (u - 0.5));
      phase += 2.0 * kPi * f / fs;
      if (phase > 2.0 * kPi) phase -= 2.0 * kPi;
      // sin(k phase) by the Chebyshev recurrence.
      const double c2 = 2.0 * std::cos(phase);
      double s_prev = 0.0, s_cur = std::sin(phase), acc = 0.0;
      for (int k = 1; k <= k_max; ++k) {
        acc += amp[k] * s_cur;
        const double s_next = c2 * s_cur - s_prev;
        s_prev = s_cur;
        s_cur = s_next;
      }
      out[pos + i] += env * (acc + voice.breath * Normal(rng, 0.0, 1.0));
    }
    pos += len + static_cast<std::size_t>(Uniform(rng, 0.02, 0.09) * fs);
  }
  NormalizePeak(out, 0.5);
  return out;
}

std::vector<double> SynthesizeNoise(int index, std::mt19937_64& rng, std::size_t n) {
  std::vector<double> out(n);
  const double fs = kSampleRate;
  const double pole = Uniform(rng, 0.3, 0.97);
  const double mod_hz = Uniform(rng, 0.1, 3.0);
  const double depth = Uniform(rng, 0.1, 0.8);
  double lp = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = Normal(rng, 0.0, 1.0);
    lp = pole * lp + (1.0 - pole) * w;
    double s = lp;
    if (index % 3 == 1) {
      s = lp - prev;  // brighter
    } else if (index % 3 == 2) {
      s = lp * (std::sin(2.0 * kPi * 4.0 * i / fs) > 0.3 ? 1.0 : 0.2);  // bursty
    }
    prev = lp;
    out[i] = s * (1.0 - depth + depth * std::sin(2.0 * kPi * mod_hz * i / fs));
  }
  NormalizePeak(out, 0.5);
  return out;
}

std::vector<double> SynthesizeMusic(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> out(n, 0.0);
  const double fs = kSampleRate;
  const double base = Uniform(rng, 110.0, 330.0);
  const int scale[] = {0, 2, 4, 7, 9, 12, 14, 16};
  std::size_t pos = 0;
  while (pos < n) {
    const std::size_t len = static_cast<std::size_t>(Uniform(rng, 0.2, 0.6) * fs);
    const int voices = 1 + static_cast<int>(rng() % 3);
    for (int v = 0; v < voices; ++v) {
      const double f = base * std::pow(2.0, scale[rng() % 8] / 12.0);
      const double decay = Uniform(rng, 2.0, 8.0);
      for (std::size_t i = 0; i < len && pos + i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double env = std::exp(-decay * t) * std::min(1.0, t * 200.0);
        double s = 0.0;
        for (int h = 1; h <= 4; ++h) s += std::sin(2.0 * kPi * f * h * t) / (h * h);
        out[pos + i] += env * s;
      }
    }
    pos += len;
  }
  NormalizePeak(out, 0.5);
  return out;
}

// ---- plan helpers ------------------------------------------------------------

std::vector<BackgroundEvent> PlaceEvents(const SimConfig& c, double coverage, const std::vector<ClipRef>& pool,
                                         bool is_music, const LufsTargets& rec, std::mt19937_64& rng) {
  std::vector<BackgroundEvent> events;
  const std::int64_t total_ms = ToMs(c.recording_len_s);
  const std::int64_t target_ms = std::min(total_ms, ToMs(coverage * c.recording_len_s));
  if (target_ms <= 0) return events;
  std::vector<std::int64_t> lengths;
  std::int64_t remaining = target_ms;
  while (remaining > 0) {
    const std::int64_t len = std::min(remaining, ToMs(Uniform(rng, c.event_min_s, c.event_max_s)));
    lengths.push_back(len);
    remaining -= len;
  }
  // Random split of the uncovered time into k + 1 gaps.
  const std::int64_t gap_ms = total_ms - target_ms;
  std::vector<std::int64_t> cuts(lengths.size());
  std::uniform_int_distribution<std::int64_t> cut(0, gap_ms);
  for (auto& x : cuts) x = cut(rng);
  std::sort(cuts.begin(), cuts.end());
  std::int64_t covered = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    BackgroundEvent e;
    e.clip = Pick(rng, pool);
    e.start_s = FromMs(cuts[i] + covered);
    e.duration_s = FromMs(lengths[i]);
    e.source_offset_s = FromMs(FloorMs(Uniform(rng, 0.0, e.clip.duration_s)));
    if (is_music) {
      e.cls = BackgroundClass::kMusic;
      e.target_lufs = Uniform(rng, rec.music - c.clip_jitter, rec.music + c.clip_jitter);
    } else {
      const bool fg = Uniform(rng, 0.0, 1.0) < c.foreground_noise_prob;
      e.cls = fg ? BackgroundClass::kForegroundNoise : BackgroundClass::kBackgroundNoise;
      const double level = fg ? rec.fg_noise : rec.bg_noise;
      e.target_lufs = Uniform(rng, level - c.clip_jitter, level + c.clip_jitter);
    }
    covered += lengths[i];
    events.push_back(std::move(e));
  }
  return events;
}

ordered_json ClipJson(const ClipRef& clip) {
  ordered_json j;
  j["id"] = clip.id;
  j["path"] = clip.path.generic_string();
  j["duration_s"] = clip.duration_s;
  return j;
}

ordered_json LufsJson(const LufsTargets& t) {
  ordered_json j;
  j["speech"] = t.speech;
  j["music"] = t.music;
  j["fg_noise"] = t.fg_noise;
  j["bg_noise"] = t.bg_noise;
  return j;
}

ordered_json BackgroundJson(const BackgroundEvent& e) {
  ordered_json j;
  j["class"] = BackgroundClassName(e.cls);
  j["clip"] = ClipJson(e.clip);
  j["source_offset_s"] = e.source_offset_s;
  j["start_s"] = e.start_s;
  j["duration_s"] = e.duration_s;
  j["target_lufs"] = e.target_lufs;
  return j;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ClipRef> WavClips(const fs::path& dir) {
  std::vector<ClipRef> clips;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    clips.push_back({p.stem().string(), p, ReadWav(p).duration_s()});
  }
  return clips;
}

SourceCorpus FileCorpus() {
  SourceCorpus c;
  c.loader = [](const ClipRef& clip) { return ReadWav(clip.path); };
  return c;
}

void FinishCorpus(SourceCorpus& c) {
  for (auto it = c.speech.begin(); it != c.speech.end();) {
    it = it->second.empty() ? c.speech.erase(it) : std::next(it);
  }
  c.speakers.clear();
  for (const auto& [spk, clips] : c.speech) c.speakers.push_back(spk);
  c.class_table = c.speakers;
}

}  // namespace

// ---- config ----------------------------------------------------------------

void SimConfig::Validate() const {
  Require(n_speakers_std >= 0.0, "n_speakers_std must be >= 0");
  Require(n_speakers_min >= 1, "n_speakers_min must be >= 1");
  Require(n_speakers_max >= n_speakers_min, "n_speakers_max must be >= n_speakers_min");
  Require(utt_len_std >= 0.0, "utt_len_std must be >= 0");
  Require(utt_len_min_s > 0.0, "utt_len_min_s must be > 0");
  Require(silence_prob >= 0.0 && silence_prob <= 1.0, "silence_prob must be in [0, 1]");
  Require(silence_std >= 0.0, "silence_std must be >= 0");
  Require(silence_min_s >= 0.0, "silence_min_s must be >= 0");
  Require(overlap_prob >= 0.0 && overlap_prob <= 1.0, "overlap_prob must be in [0, 1]");
  Require(overlap_min_s > 0.0, "overlap_min_s must be > 0");
  Require(overlap_max_s >= overlap_min_s, "overlap_max_s must be >= overlap_min_s");
  Require(recording_len_s > 0.0, "recording_len_s must be > 0");
  Require(noise_coverage >= 0.0 && noise_coverage <= 1.0, "noise_coverage must be in [0, 1]");
  Require(music_coverage >= 0.0 && music_coverage <= 1.0, "music_coverage must be in [0, 1]");
  Require(event_min_s > 0.0, "event_min_s must be > 0");
  Require(event_max_s >= event_min_s, "event_max_s must be >= event_min_s");
  Require(foreground_noise_prob >= 0.0 && foreground_noise_prob <= 1.0,
          "foreground_noise_prob must be in [0, 1]");
  Require(recording_jitter >= 0.0 && clip_jitter >= 0.0, "loudness jitter must be >= 0");
  Require(fade_s >= 0.0, "fade_s must be >= 0");
}

SimConfig SimConfig::FromJson(std::string_view text) {
  SimConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("simulator config must be a json object");
    const std::map<std::string, double*> reals = {
        {"n_speakers_mean", &c.n_speakers_mean}, {"n_speakers_std", &c.n_speakers_std},
        {"utt_len_mean", &c.utt_len_mean},       {"utt_len_std", &c.utt_len_std},
        {"utt_len_min_s", &c.utt_len_min_s},     {"silence_prob", &c.silence_prob},
        {"silence_mean", &c.silence_mean},       {"silence_std", &c.silence_std},
        {"silence_min_s", &c.silence_min_s},     {"overlap_prob", &c.overlap_prob},
        {"overlap_min_s", &c.overlap_min_s},     {"overlap_max_s", &c.overlap_max_s},
        {"recording_len_s", &c.recording_len_s}, {"noise_coverage", &c.noise_coverage},
        {"music_coverage", &c.music_coverage},   {"event_min_s", &c.event_min_s},
        {"event_max_s", &c.event_max_s},         {"foreground_noise_prob", &c.foreground_noise_prob},
        {"recording_jitter", &c.recording_jitter}, {"clip_jitter", &c.clip_jitter},
        {"fade_s", &c.fade_s}};
    for (const auto& [key, value] : j.items()) {
      if (auto it = reals.find(key); it != reals.end()) {
        *it->second = value.get<double>();
      } else if (key == "n_speakers_min") {
        c.n_speakers_min = value.get<int>();
      } else if (key == "n_speakers_max") {
        c.n_speakers_max = value.get<int>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "lufs_targets") {
        for (const auto& [k, v] : value.items()) {
          if (k == "speech") c.lufs_targets.speech = v.get<double>();
          else if (k == "music") c.lufs_targets.music = v.get<double>();
          else if (k == "fg_noise") c.lufs_targets.fg_noise = v.get<double>();
          else if (k == "bg_noise") c.lufs_targets.bg_noise = v.get<double>();
          else throw ConfigError("unknown lufs_targets key '" + k + "'");
        }
      } else {
        throw ConfigError("unknown simulator config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulator config json: ") + e.what());
  }
  c.Validate();
  return c;
}

std::string SimConfig::ToJson() const {
  ordered_json j;
  j["n_speakers_mean"] = n_speakers_mean;
  j["n_speakers_std"] = n_speakers_std;
  j["n_speakers_min"] = n_speakers_min;
  j["n_speakers_max"] = n_speakers_max;
  j["utt_len_mean"] = utt_len_mean;
  j["utt_len_std"] = utt_len_std;
  j["utt_len_min_s"] = utt_len_min_s;
  j["silence_prob"] = silence_prob;
  j["silence_mean"] = silence_mean;
  j["silence_std"] = silence_std;
  j["silence_min_s"] = silence_min_s;
  j["overlap_prob"] = overlap_prob;
  j["overlap_min_s"] = overlap_min_s;
  j["overlap_max_s"] = overlap_max_s;
  j["recording_len_s"] = recording_len_s;
  j["noise_coverage"] = noise_coverage;
  j["music_coverage"] = music_coverage;
  j["event_min_s"] = event_min_s;
  j["event_max_s"] = event_max_s;
  j["foreground_noise_prob"] = foreground_noise_prob;
  j["lufs_targets"] = LufsJson(lufs_targets);
  j["recording_jitter"] = recording_jitter;
  j["clip_jitter"] = clip_jitter;
  j["fade_s"] = fade_s;
  j["seed"] = seed;
  return j.dump(2);
}

// ---- corpora -----------------------------------------------------------------

std::size_t SourceCorpus::ClassIndex(const std::string& speaker) const {
  auto it = std::lower_bound(class_table.begin(), class_table.end(), speaker);
  if (it == class_table.end() || *it != speaker) return 0;
  return static_cast<std::size_t>(it - class_table.begin()) + 1;
}

SourceCorpus MakeSyntheticCorpus(const SyntheticCorpusConfig& config) {
  if (config.n_speakers < 1 || config.clips_per_speaker < 1 || config.n_noise < 0 || config.n_music < 0 ||
      !(config.clip_min_s > 0.0) || config.clip_max_s < config.clip_min_s || !(config.background_len_s > 0.0)) {
    throw ConfigError("synthetic corpus: bad sizes");
  }
  SourceCorpus c;
  char name[32];
  std::mt19937_64 rng = Stream(config.seed, 0, 0);
  for (int s = 0; s < config.n_speakers; ++s) {
    std::snprintf(name, sizeof(name), "spk%03d", s);
    auto& clips = c.speech[name];
    for (int k = 0; k < config.clips_per_speaker; ++k) {
      const double dur = FromMs(ToMs(Uniform(rng, config.clip_min_s, config.clip_max_s)));
      clips.push_back({std::string(name) + "/" + std::to_string(k), {}, dur});
    }
  }
  for (int k = 0; k < config.n_noise; ++k) {
    c.noise.push_back({"_noise/" + std::to_string(k), {}, config.background_len_s});
  }
  for (int k = 0; k < config.n_music; ++k) {
    c.music.push_back({"_music/" + std::to_string(k), {}, config.background_len_s});
  }
  FinishCorpus(c);
  const SyntheticCorpusConfig cfg = config;
  c.loader = [cfg](const ClipRef& clip) {
    const auto slash = clip.id.find('/');
    if (slash == std::string::npos) throw InputError("synthetic clip id '" + clip.id + "'");
    const std::string group = clip.id.substr(0, slash);
    const int k = std::stoi(clip.id.substr(slash + 1));
    Waveform w;
    const auto n = static_cast<std::size_t>(std::llround(clip.duration_s * kSampleRate));
    if (group == "_noise") {
      std::mt19937_64 rng = Stream(cfg.seed, 3, k);
      w.samples = SynthesizeNoise(k, rng, n);
    } else if (group == "_music") {
      std::mt19937_64 rng = Stream(cfg.seed, 4, k);
      w.samples = SynthesizeMusic(rng, n);
    } else {
      const int spk = std::stoi(group.substr(3));
      std::mt19937_64 rng = Stream(cfg.seed, 2, spk, k);
      w.samples = SynthesizeSpeech(MakeVoice(cfg.seed, spk, cfg.n_speakers), rng, n);
    }
    return w;
  };
  return c;
}

SourceCorpus ScanCorpusDirectory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  SourceCorpus c = FileCorpus();
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "_noise") {
      c.noise = WavClips(entry.path());
    } else if (name == "_music") {
      c.music = WavClips(entry.path());
    } else if (!name.empty() && name[0] != '_' && name[0] != '.') {
      c.speech[name] = WavClips(entry.path());
    }
  }
  FinishCorpus(c);
  return c;
}

SourceCorpus LoadCorpusIndex(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open corpus index " + json_path.string());
  const fs::path base = json_path.parent_path();
  SourceCorpus c = FileCorpus();
  auto clip = [&base](const std::string& rel) {
    const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
    return ClipRef{p.stem().string(), p, ReadWav(p).duration_s()};
  };
  try {
    const json j = json::parse(in);
    for (const auto& [spk, files] : j.at("speakers").items()) {
      for (const auto& f : files) c.speech[spk].push_back(clip(f.get<std::string>()));
    }
    if (j.contains("noise")) {
      for (const auto& f : j.at("noise")) c.noise.push_back(clip(f.get<std::string>()));
    }
    if (j.contains("music")) {
      for (const auto& f : j.at("music")) c.music.push_back(clip(f.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ParseError("corpus index " + json_path.string() + ": " + e.what());
  }
  FinishCorpus(c);
  return c;
}

std::pair<SourceCorpus, SourceCorpus> SplitCorpus(const SourceCorpus& corpus, double test_fraction,
                                                  std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw ConfigError("test fraction must be in [0, 1]");
  std::vector<std::string> order = corpus.speakers;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * order.size()));
  SourceCorpus train = corpus, test = corpus;
  train.speech.clear();
  test.speech.clear();
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_test ? test : train).speech[order[i]] = corpus.speech.at(order[i]);
  }
  for (SourceCorpus* part : {&train, &test}) {
    part->speakers.clear();
    for (const auto& [spk, clips] : part->speech) part->speakers.push_back(spk);
  }
  return {std::move(train), std::move(test)};
}

// ---- planning ------------------------------------------------------------------

const char* JointKindName(JointKind kind) {
  switch (kind) {
    case JointKind::kFirst: return "first";
    case JointKind::kSilence: return "silence";
    case JointKind::kOverlap: return "overlap";
    case JointKind::kAbut: return "abut";
  }
  return "?";
}

const char* BackgroundClassName(BackgroundClass cls) {
  switch (cls) {
    case BackgroundClass::kMusic: return "music";
    case BackgroundClass::kForegroundNoise: return "fg_noise";
    case BackgroundClass::kBackgroundNoise: return "bg_noise";
  }
  return "?";
}

PlannedRecording SamplePlan(const SimConfig& c, const SourceCorpus& corpus, std::mt19937_64& rng,
                            const std::string& recording_id) {
  c.Validate();
  if (corpus.speakers.size() < static_cast<std::size_t>(c.n_speakers_max)) {
    throw ConfigError("simulator: corpus has " + std::to_string(corpus.speakers.size()) +
                      " speakers, n_speakers_max is " + std::to_string(c.n_speakers_max));
  }
  if (c.noise_coverage > 0.0 && corpus.noise.empty()) throw ConfigError("simulator: corpus has no noise clips");
  if (c.music_coverage > 0.0 && corpus.music.empty()) throw ConfigError("simulator: corpus has no music clips");

  PlannedRecording out;
  MixPlan& plan = out.plan;
  plan.recording_id = recording_id;
  plan.length_s = FromMs(ToMs(c.recording_len_s));

  const long drawn = std::lround(Normal(rng, c.n_speakers_mean, c.n_speakers_std));
  const int n = static_cast<int>(std::clamp<long>(drawn, c.n_speakers_min, c.n_speakers_max));
  std::vector<std::string> pool = corpus.speakers;
  std::shuffle(pool.begin(), pool.end(), rng);
  plan.speakers.assign(pool.begin(), pool.begin() + n);
  std::sort(plan.speakers.begin(), plan.speakers.end());

  auto jitter = [&rng, &c](double t) { return Uniform(rng, t - c.recording_jitter, t + c.recording_jitter); };
  plan.recording_lufs.speech = jitter(c.lufs_targets.speech);
  plan.recording_lufs.music = jitter(c.lufs_targets.music);
  plan.recording_lufs.fg_noise = jitter(c.lufs_targets.fg_noise);
  plan.recording_lufs.bg_noise = jitter(c.lufs_targets.bg_noise);

  const std::int64_t length_ms = ToMs(plan.length_s);
  const std::int64_t min_ms = std::max<std::int64_t>(1, ToMs(c.utt_len_min_s));
  const double silence_share = std::min(c.silence_prob, 1.0 - c.overlap_prob);
  std::int64_t prev_start = 0, prev_end = 0, other_end = 0;
  while (true) {
    UtteranceEvent u;
    std::int64_t dur_ms = ToMs(std::max(c.utt_len_min_s, std::abs(Normal(rng, c.utt_len_mean, c.utt_len_std))));
    if (!plan.utterances.empty()) {
      const double r = Uniform(rng, 0.0, 1.0);
      u.joint = r < c.overlap_prob                  ? JointKind::kOverlap
                : r < c.overlap_prob + silence_share ? JointKind::kSilence
                                                     : JointKind::kAbut;
      if (u.joint == JointKind::kOverlap && n < 2) u.joint = JointKind::kAbut;
    }
    // Speaker and clip come first: the clip length bounds the utterance
    // and, through it, the overlap.
    if (u.joint == JointKind::kOverlap) {
      std::vector<std::string> others;
      for (const auto& s : plan.speakers) {
        if (s != plan.utterances.back().speaker) others.push_back(s);
      }
      u.speaker = Pick(rng, others);
    } else {
      u.speaker = Pick(rng, plan.speakers);
    }
    u.clip = Pick(rng, corpus.speech.at(u.speaker));
    dur_ms = std::min(dur_ms, FloorMs(u.clip.duration_s));
    if (dur_ms <= 0) throw InputError("speech clip '" + u.clip.id + "' is empty");

    std::int64_t start_ms = 0;
    if (u.joint == JointKind::kOverlap) {
      // At most two talkers: the newcomer starts after everyone but the
      // previous speaker has finished, and ends no earlier than it.
      const std::int64_t cap = std::min({FloorMs(c.overlap_max_s), prev_end - prev_start, prev_end - other_end, dur_ms});
      if (cap < 1) {
        u.joint = JointKind::kAbut;
      } else {
        const double lo = std::min(c.overlap_min_s, FromMs(cap));
        const std::int64_t d = std::clamp<std::int64_t>(FloorMs(Uniform(rng, lo, FromMs(cap))), 1, cap);
        u.joint_s = FromMs(d);
        start_ms = prev_end - d;
      }
    }
    if (u.joint == JointKind::kSilence) {
      const std::int64_t gap = ToMs(TruncatedNormal(rng, c.silence_mean, c.silence_std, c.silence_min_s));
      u.joint_s = FromMs(gap);
      start_ms = prev_end + gap;
    } else if (u.joint == JointKind::kAbut) {
      start_ms = prev_end;
    }
    if (start_ms + std::min(min_ms, dur_ms) > length_ms) break;
    dur_ms = std::min(dur_ms, length_ms - start_ms);

    u.start_s = FromMs(start_ms);
    u.duration_s = FromMs(dur_ms);
    u.source_offset_s = FromMs(FloorMs(Uniform(rng, 0.0, u.clip.duration_s - u.duration_s)));
    u.target_lufs = Uniform(rng, plan.recording_lufs.speech - c.clip_jitter, plan.recording_lufs.speech + c.clip_jitter);
    if (!plan.utterances.empty()) other_end = std::max(other_end, prev_end);
    prev_start = start_ms;
    prev_end = start_ms + dur_ms;
    out.segments.push_back({recording_id, u.speaker, u.start_s, u.start_s + u.duration_s});
    plan.utterances.push_back(std::move(u));
  }
  plan.noise = PlaceEvents(c, c.noise_coverage, corpus.noise, false, plan.recording_lufs, rng);
  plan.music = PlaceEvents(c, c.music_coverage, corpus.music, true, plan.recording_lufs, rng);
  SortSegments(out.segments);
  return out;
}

int MaxConcurrentSpeakers(const MixPlan& plan) {
  std::vector<std::pair<std::int64_t, int>> edges;
  for (const auto& u : plan.utterances) {
    edges.emplace_back(ToMs(u.start_s), 1);
    edges.emplace_back(ToMs(u.start_s + u.duration_s), -1);
  }
  std::sort(edges.begin(), edges.end());  // ends sort before starts at a tie
  int active = 0, best = 0;
  for (const auto& [t, d] : edges) best = std::max(best, active += d);
  return best;
}

double Coverage(const std::vector<BackgroundEvent>& events, double length_s) {
  std::vector<std::pair<double, double>> iv;
  for (const auto& e : events) iv.emplace_back(e.start_s, std::min(length_s, e.start_s + e.duration_s));
  std::sort(iv.begin(), iv.end());
  double covered = 0.0, reach = 0.0;
  for (const auto& [a, b] : iv) {
    const double from = std::max(a, reach);
    if (b > from) covered += b - from;
    reach = std::max(reach, b);
  }
  return length_s > 0.0 ? covered / length_s : 0.0;
}

// ---- rendering -----------------------------------------------------------------

std::vector<double> PrepareClip(const Waveform& source, double offset_s, double duration_s, double fade_s,
                                bool loop) {
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * source.sample_rate));
  const std::size_t off = static_cast<std::size_t>(std::llround(offset_s * source.sample_rate));
  const std::size_t len = source.samples.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n && len > 0; ++i) {
    const std::size_t j = off + i;
    if (j < len) {
      out[i] = source.samples[j];
    } else if (loop) {
      out[i] = source.samples[j % len];
    }
  }
  const std::size_t f = std::min(n / 2, static_cast<std::size_t>(std::llround(fade_s * source.sample_rate)));
  for (std::size_t i = 0; i < f; ++i) {
    const double g = (static_cast<double>(i) + 0.5) / static_cast<double>(f);
    out[i] *= g;
    out[n - 1 - i] *= g;
  }
  return out;
}

std::optional<double> ClipLoudness(const std::vector<double>& prepared, const Waveform& source) {
  const auto block = static_cast<std::size_t>(std::ceil(kBlockSeconds * source.sample_rate));
  if (prepared.size() >= block) return MeasureLufs(prepared, source.sample_rate);
  if (source.samples.size() >= block) return MeasureLufs(source.samples, source.sample_rate);
  return std::nullopt;
}

double SoftLimit(double x) {
  constexpr double kKnee = 0.9;
  const double a = std::abs(x);
  if (a <= kKnee) return x;
  // Rational knee: unit slope at the knee, approaches 1. The cap keeps the
  // result below 1 after rounding to float32.
  const double y = (a - kKnee) / (1.0 - kKnee);
  return std::copysign(std::min(kKnee + (1.0 - kKnee) * y / (1.0 + y), 1.0 - 0x1p-23), x);
}

RenderedRecording Render(const MixPlan& plan, const SimConfig& config, const SourceCorpus& corpus) {
  RenderedRecording r;
  r.audio.samples.assign(static_cast<std::size_t>(std::llround(plan.length_s * kSampleRate)), 0.0);
  std::unordered_map<std::string, Waveform> cache;
  auto load = [&](const ClipRef& clip) -> const Waveform& {
    auto it = cache.find(clip.id + "\n" + clip.path.string());
    if (it == cache.end()) {
      Waveform w = corpus.Load(clip);
      if (w.sample_rate != kSampleRate) {
        throw InputError("clip '" + clip.id + "' has sample rate " + std::to_string(w.sample_rate));
      }
      it = cache.emplace(clip.id + "\n" + clip.path.string(), std::move(w)).first;
    }
    return it->second;
  };
  auto add = [&](const ClipRef& clip, double offset, double start, double duration, double target, bool loop) {
    const Waveform& src = load(clip);
    const std::vector<double> x = PrepareClip(src, offset, duration, config.fade_s, loop);
    const std::optional<double> loud = ClipLoudness(x, src);
    const double gain_db = loud ? target - *loud : 0.0;
    const double g = std::pow(10.0, gain_db / 20.0);
    const auto at = static_cast<std::size_t>(std::llround(start * kSampleRate));
    for (std::size_t i = 0; i < x.size() && at + i < r.audio.samples.size(); ++i) {
      r.audio.samples[at + i] += g * x[i];
    }
    r.gain_db.push_back(gain_db);
  };
  for (const auto& u : plan.utterances) add(u.clip, u.source_offset_s, u.start_s, u.duration_s, u.target_lufs, false);
  for (const auto& e : plan.noise) add(e.clip, e.source_offset_s, e.start_s, e.duration_s, e.target_lufs, true);
  for (const auto& e : plan.music) add(e.clip, e.source_offset_s, e.start_s, e.duration_s, e.target_lufs, true);

  double peak = 0.0;
  for (double s : r.audio.samples) peak = std::max(peak, std::abs(s));
  if (peak > 1.0) {
    for (double& s : r.audio.samples) s = SoftLimit(s);
    r.limited = true;
  }
  for (const auto& u : plan.utterances) {
    r.segments.push_back({plan.recording_id, u.speaker, u.start_s, u.start_s + u.duration_s});
  }
  SortSegments(r.segments);
  return r;
}

// ---- dataset -----------------------------------------------------------------

std::mt19937_64 RecordingRng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x51u};
  return std::mt19937_64(seq);
}

std::string MixPlanToJson(const MixPlan& plan) {
  ordered_json j;
  j["recording_id"] = plan.recording_id;
  j["length_s"] = plan.length_s;
  j["speakers"] = plan.speakers;
  j["recording_lufs"] = LufsJson(plan.recording_lufs);
  j["utterances"] = ordered_json::array();
  for (const auto& u : plan.utterances) {
    ordered_json e;
    e["speaker"] = u.speaker;
    e["clip"] = ClipJson(u.clip);
    e["source_offset_s"] = u.source_offset_s;
    e["start_s"] = u.start_s;
    e["duration_s"] = u.duration_s;
    e["target_lufs"] = u.target_lufs;
    e["joint"] = JointKindName(u.joint);
    e["joint_s"] = u.joint_s;
    j["utterances"].push_back(std::move(e));
  }
  j["noise"] = ordered_json::array();
  for (const auto& e : plan.noise) j["noise"].push_back(BackgroundJson(e));
  j["music"] = ordered_json::array();
  for (const auto& e : plan.music) j["music"].push_back(BackgroundJson(e));
  return j.dump(2);
}

std::string ManifestToJson(const std::vector<ManifestEntry>& entries) {
  ordered_json j = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json o;
    o["recording_id"] = e.recording_id;
    o["wav"] = e.wav;
    o["rttm"] = e.rttm;
    o["labels"] = e.labels;
    o["speakers"] = e.speakers;
    o["duration_s"] = e.duration_s;
    j.push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

std::vector<ManifestEntry> ReadManifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  try {
    const json j = json::parse(in);
    if (!j.is_array()) throw ParseError("manifest " + path.string() + " is not a json array");
    for (const auto& o : j) {
      ManifestEntry e;
      e.recording_id = o.at("recording_id").get<std::string>();
      e.wav = o.at("wav").get<std::string>();
      e.rttm = o.at("rttm").get<std::string>();
      e.labels = o.value("labels", std::string());
      e.speakers = o.value("speakers", std::vector<std::string>());
      e.duration_s = o.value("duration_s", 0.0);
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  return out;
}

std::map<std::string, std::size_t> ReadSpeakerLabels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open speaker labels " + path.string());
  std::map<std::string, std::size_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string spk;
    long long cls = -1;
    if (!(fields >> spk >> cls) || cls < 0) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": expected '<speaker> <class>'");
    }
    labels[spk] = static_cast<std::size_t>(cls);
  }
  return labels;
}

std::vector<ManifestEntry> EmitDataset(const SimConfig& config, const SourceCorpus& corpus, int n_recordings,
                                       const fs::path& out_dir, const std::string& prefix) {
  config.Validate();
  if (n_recordings < 0) throw ConfigError("simulator: n_recordings must be >= 0");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  if (n_recordings > 0) {
    for (const char* sub : {"wav", "rttm", "labels", "plans"}) {
      fs::create_directories(out_dir / sub, ec);
      if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
    }
  }
  char id[64];
  for (int i = 0; i < n_recordings; ++i) {
    std::snprintf(id, sizeof(id), "%s%04d", prefix.c_str(), i);
    std::mt19937_64 rng = RecordingRng(config.seed, static_cast<std::uint64_t>(i));
    const PlannedRecording planned = SamplePlan(config, corpus, rng, id);
    const RenderedRecording rendered = Render(planned.plan, config, corpus);
    ManifestEntry e;
    e.recording_id = id;
    e.wav = "wav/" + e.recording_id + ".wav";
    e.rttm = "rttm/" + e.recording_id + ".rttm";
    e.labels = "labels/" + e.recording_id + ".txt";
    e.speakers = SpeakerOrder(rendered.segments);
    e.duration_s = planned.plan.length_s;
    WriteWav(out_dir / e.wav, rendered.audio, WavEncoding::kFloat32);
    WriteRttm(out_dir / e.rttm, rendered.segments);
    std::string labels;
    for (const auto& spk : e.speakers) labels += spk + " " + std::to_string(corpus.ClassIndex(spk)) + "\n";
    WriteText(out_dir / e.labels, labels);
    WriteText(out_dir / "plans" / (e.recording_id + ".json"), MixPlanToJson(planned.plan) + "\n");
    entries.push_back(std::move(e));
  }
  WriteText(out_dir / "manifest.json", ManifestToJson(entries));
  return entries;
}

}  // namespace avdiar
