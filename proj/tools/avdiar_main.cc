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


// avdiar: command-line front end for simulation, training, inference,
// visual clustering, fusion and scoring.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "avdiar/activity.h"
#include "avdiar/error.h"
#include "avdiar/eval.h"
#include "avdiar/fusion.h"
#include "avdiar/model.h"
#include "avdiar/segments.h"
#include "avdiar/simulator.h"
#include "avdiar/trainer.h"
#include "avdiar/vahc.h"
#include "avdiar/wav.h"

namespace fs = std::filesystem;
using namespace avdiar;

namespace {

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

SourceCorpus OpenCorpus(const std::string& spec) {
  if (spec == "synthetic") return MakeSyntheticCorpus({});
  const fs::path p(spec);
  if (fs::is_directory(p)) return ScanCorpusDirectory(p);
  if (p.extension() == ".json") return LoadCorpusIndex(p);
  throw InputError("corpus must be 'synthetic', a directory or a .json index: " + spec);
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string config, corpus = "synthetic", out, split = "all";
  int n = 1;
  std::uint64_t seed = 0;
  double test_fraction = 0.25;
  std::uint64_t split_seed = 0;
  std::string prefix = "rec";
};

void RunSimulate(const SimulateArgs& a) {
  SimConfig config = a.config.empty() ? SimConfig{} : SimConfig::FromJson(ReadText(a.config));
  config.seed = a.seed;
  SourceCorpus corpus = OpenCorpus(a.corpus);
  if (a.split != "all") {
    auto [train, test] = SplitCorpus(corpus, a.test_fraction, a.split_seed);
    corpus = a.split == "train" ? std::move(train) : std::move(test);
  }
  const auto entries = EmitDataset(config, corpus, a.n, a.out, a.prefix);
  std::cout << "wrote " << entries.size() << " recordings to " << a.out << "\n";
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string manifest, val_manifest, preset = "plusplus", out, config, log, init;
  std::optional<int> epochs, batch_size, warmup;
  std::uint64_t seed = 0;
  bool paper_scale = false;
};

void RunTrain(const TrainArgs& a) {
  TrainConfig tc = a.config.empty() ? TrainConfig{} : TrainConfig::FromJson(ReadText(a.config));
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.warmup) tc.warmup_steps = *a.warmup;
  tc.seed = a.seed;
  tc.Validate();

  std::optional<EendModel> model;
  if (!a.init.empty()) {
    model.emplace(std::move(LoadModel(a.init).model));  // continue training
  } else {
    model.emplace(a.paper_scale ? ModelConfig::PaperScale(a.preset) : ModelConfig::Preset(a.preset), a.seed);
  }
  const bool spk = model->config().use_speaker_head;
  const auto train = LoadDataset(a.manifest, spk);
  const auto val = a.val_manifest.empty() ? std::vector<TrainingExample>{} : LoadDataset(a.val_manifest, false);
  if (spk && a.init.empty()) {
    ModelConfig mc = model->config();
    mc.n_corpus_speakers = static_cast<int>(std::max<std::size_t>(1, MaxSpeakerClass(train)));
    model.emplace(mc, a.seed);
  }
  std::ofstream log_file;
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  log_file.open(log_path, std::ios::binary);
  if (!log_file) throw IoError("cannot write " + log_path.string());
  const TrainResult r = Train(*model, train, val, tc, a.out, &log_file);
  std::printf("best epoch %d, DER %.2f at threshold %.2f\n", r.best_epoch, r.best_der, r.best_threshold);
}

// ---- infer / export-emb ----------------------------------------------------------

struct InferArgs {
  std::string model, wav, out_prefix, recording;
  std::optional<double> threshold;
  std::optional<int> median, oracle;
};

void RunInfer(const InferArgs& a) {
  const LoadedModel loaded = LoadModel(a.model);
  DecodeSettings d = DecodeSettingsFromMetadata(loaded.metadata_json);
  if (a.threshold) d.threshold = *a.threshold;
  if (a.median) d.median_frames = *a.median;
  const Matrix features = ModelFeatures(ReadWav(a.wav));
  std::optional<std::size_t> oracle;
  if (a.oracle) {
    if (*a.oracle < 1) throw ContractError("--oracle-speakers must be >= 1");
    oracle = static_cast<std::size_t>(*a.oracle);
  }
  const InferenceResult r = loaded.model.Infer(features, oracle);
  ActivityMatrix activity;
  activity.frame_shift_s = kModelFrameShiftS;
  activity.probs = r.activity;
  const std::string id = a.recording.empty() ? fs::path(a.wav).stem().string() : a.recording;
  WriteText(a.out_prefix + ".activity.csv", ActivityCsvString(activity));
  WriteText(a.out_prefix + ".attractors.csv", AttractorCsvString(r.attractors));
  WriteText(a.out_prefix + ".embeddings.csv", EmbeddingCsvString(r.embeddings, kModelFrameShiftS));
  WriteText(a.out_prefix + ".rttm", RttmString(Binarize(activity, d.threshold, d.median_frames, id)));
  std::printf("%zu frames, %zu speakers\n", activity.num_frames(), activity.num_streams());
}

void RunExportEmb(const std::string& model_path, const std::string& wav, const std::string& out) {
  const LoadedModel loaded = LoadModel(model_path);
  const InferenceResult r = loaded.model.Infer(ModelFeatures(ReadWav(wav)));
  WriteText(out, EmbeddingCsvString(r.embeddings, kModelFrameShiftS));
}

// ---- visual ------------------------------------------------------------------------

struct VahcArgs {
  std::string tracks, out, clusters;
  double threshold = kDefaultAhcThreshold, shift = 0.1;
  std::size_t frames = 0;
  std::uint64_t seed = 0;
};

void RunVahcCommand(const VahcArgs& a) {
  const VahcResult r = RunVahc(ReadFaceTracks(a.tracks), a.threshold, a.seed, a.shift, a.frames);
  WriteText(a.out, ActivityCsvString(r.streams));
  if (!a.clusters.empty()) {
    std::string text;
    for (std::size_t i = 0; i < r.clusters.track_ids.size(); ++i) {
      text += r.clusters.track_ids[i] + " " + std::to_string(r.clusters.labels[i]) + "\n";
    }
    WriteText(a.clusters, text);
  }
  std::printf("%d clusters from %zu tracks\n", r.clusters.num_clusters, r.clusters.track_ids.size());
}

struct FuseArgs {
  std::string audio, visual, mode = "recording", out;
  bool mute_others = false;
  double threshold = kDefaultAhcThreshold;
  std::uint64_t seed = 0;
};

void RunFuse(const FuseArgs& a) {
  const ActivityMatrix audio = ReadActivityCsv(a.audio);
  ValidateActivity(audio);
  const bool tracks = fs::path(a.visual).extension() == ".jsonl";
  ActivityMatrix fused;
  if (a.mode == "track") {
    if (!tracks) throw InputError("track mode needs a face-track .jsonl file");
    fused = FuseTracks(audio, ReadFaceTracks(a.visual));
  } else if (a.mode == "recording") {
    const ActivityMatrix visual =
        tracks ? RunVahc(ReadFaceTracks(a.visual), a.threshold, a.seed, audio.frame_shift_s, audio.num_frames()).streams
               : ReadActivityCsv(a.visual, audio.frame_shift_s);
    ValidateActivity(visual);
    fused = FuseScores(audio, visual, MatchStreams(audio, visual), a.mute_others);
  } else {
    throw InputError("--mode must be recording or track");
  }
  WriteText(a.out, ActivityCsvString(fused));
  std::printf("%zu streams\n", fused.num_streams());
}

// ---- scoring --------------------------------------------------------------------------

void RunScore(const std::string& ref, const std::string& hyp, double collar, bool as_json) {
  std::vector<std::string> warnings;
  const SegmentList r = ReadRttm(ref, &warnings);
  const SegmentList h = ReadRttm(hyp, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  const CorpusScore score = ScoreCorpus(r, h, collar);
  std::cout << (as_json ? FormatScoreJson(score) + "\n" : FormatScoreTable(score));
}

struct BinarizeArgs {
  std::string activity, out, recording = "rec";
  double threshold = 0.5;
  int median = 11;
};

void RunBinarize(const BinarizeArgs& a) {
  const ActivityMatrix activity = ReadActivityCsv(a.activity);
  WriteText(a.out, RttmString(Binarize(activity, a.threshold, a.median, a.recording)));
}

struct GenTracksArgs {
  std::string rttm, out;
  TrackGenConfig config;
};

void RunGenTracks(const GenTracksArgs& a) {
  const FaceTrackSet tracks = GenerateTracks(ReadRttm(a.rttm), a.config);
  WriteText(a.out, FaceTracksToJsonl(tracks));
  std::printf("%zu tracks\n", tracks.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "avdiar: audio-visual speaker diarization toolkit.\n\n"
      "Formats: WAV mono 16 kHz (PCM16 or float32); RTTM SPEAKER lines; activity CSV\n"
      "'t,s0,s1,...' (frame start time, one probability column per stream); face tracks as\n"
      "JSON lines {\"track_id\", \"frames\": [{\"t\", \"active\"}], \"embeddings\": [[...]]};\n"
      "simulator manifest as a JSON array of {recording_id, wav, rttm, labels, speakers}."};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate multi-speaker recordings with RTTM labels");
  simulate->add_option("--config", sim.config, "Simulator config JSON (defaults if omitted)");
  simulate->add_option("--corpus", sim.corpus, "'synthetic', a speaker directory, or a JSON index");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--n", sim.n, "Number of recordings");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--split", sim.split, "Speaker subset: all, train or test")
      ->check(CLI::IsMember({"all", "train", "test"}));
  simulate->add_option("--test-fraction", sim.test_fraction, "Share of speakers held out for --split test");
  simulate->add_option("--split-seed", sim.split_seed, "Seed of the speaker split");
  simulate->add_option("--prefix", sim.prefix, "Recording id prefix");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a diarization model on a simulated manifest");
  train->add_option("--manifest", tr.manifest, "Training manifest")->required();
  train->add_option("--val-manifest", tr.val_manifest, "Validation manifest (training data if omitted)");
  train->add_option("--preset", tr.preset, "Model preset")->check(CLI::IsMember({"baseline", "att", "spk", "plusplus"}));
  train->add_option("--out", tr.out, "Checkpoint path (best validation DER)")->required();
  train->add_option("--epochs", tr.epochs, "Epochs");
  train->add_option("--batch-size", tr.batch_size, "Recordings per batch");
  train->add_option("--warmup", tr.warmup, "Warm-up steps");
  train->add_option("--seed", tr.seed, "Random seed");
  train->add_option("--config", tr.config, "Training config JSON");
  train->add_option("--log", tr.log, "JSON-lines log (default <out>.log.jsonl)");
  train->add_option("--init", tr.init, "Continue training from this checkpoint");
  train->add_flag("--paper-scale", tr.paper_scale, "Use the large layer sizes");

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Run a model on one recording");
  infer->add_option("--model", inf.model, "Checkpoint")->required();
  infer->add_option("--wav", inf.wav, "Input WAV")->required();
  infer->add_option("--out-prefix", inf.out_prefix, "Writes .activity.csv, .attractors.csv, .embeddings.csv, .rttm")
      ->required();
  infer->add_option("--threshold", inf.threshold, "Binarization threshold (checkpoint's if omitted)");
  infer->add_option("--median", inf.median, "Median filter length in frames");
  infer->add_option("--oracle-speakers", inf.oracle, "Decode exactly this many speakers");
  infer->add_option("--recording", inf.recording, "Recording id in the RTTM (WAV stem if omitted)");

  std::string emb_model, emb_wav, emb_out;
  auto* export_emb = app.add_subcommand("export-emb", "Write frame embeddings as CSV");
  export_emb->add_option("--model", emb_model, "Checkpoint")->required();
  export_emb->add_option("--wav", emb_wav, "Input WAV")->required();
  export_emb->add_option("--out", emb_out, "Output CSV")->required();

  VahcArgs va;
  auto* vahc = app.add_subcommand("vahc", "Cluster face tracks into visual activity streams");
  vahc->add_option("--tracks", va.tracks, "Face tracks (JSON lines)")->required();
  vahc->add_option("--threshold", va.threshold, "AHC stopping distance on -cos");
  vahc->add_option("--frames", va.frames, "Number of output frames")->required();
  vahc->add_option("--shift", va.shift, "Frame shift in seconds");
  vahc->add_option("--out", va.out, "Output activity CSV")->required();
  vahc->add_option("--clusters", va.clusters, "Also write '<track> <cluster>' lines here");
  vahc->add_option("--seed", va.seed, "Seed for embedding sampling");

  FuseArgs fu;
  auto* fuse = app.add_subcommand("fuse", "Fuse audio activity with visual streams or face tracks");
  fuse->add_option("--audio", fu.audio, "Audio activity CSV")->required();
  fuse->add_option("--visual", fu.visual, "Visual activity CSV or face tracks .jsonl")->required();
  fuse->add_option("--mode", fu.mode, "recording or track")->check(CLI::IsMember({"recording", "track"}));
  fuse->add_flag("--mute-others", fu.mute_others, "Silence other speakers where one face speaks");
  fuse->add_option("--threshold", fu.threshold, "AHC threshold when --visual is a track file");
  fuse->add_option("--seed", fu.seed, "Seed for embedding sampling");
  fuse->add_option("--out", fu.out, "Output activity CSV")->required();

  std::string ref, hyp;
  double collar = 0.25;
  bool as_json = false;
  auto* score = app.add_subcommand("score", "DER/JER of a hypothesis RTTM against a reference");
  score->add_option("--ref", ref, "Reference RTTM")->required();
  score->add_option("--hyp", hyp, "Hypothesis RTTM")->required();
  score->add_option("--collar", collar, "Collar in seconds");
  score->add_flag("--json", as_json, "JSON report instead of a table");

  BinarizeArgs bi;
  auto* binarize = app.add_subcommand("binarize", "Threshold and median-filter activity into RTTM");
  binarize->add_option("--activity", bi.activity, "Activity CSV")->required();
  binarize->add_option("--out", bi.out, "Output RTTM")->required();
  binarize->add_option("--threshold", bi.threshold, "Threshold");
  binarize->add_option("--median", bi.median, "Median filter length in frames (odd)");
  binarize->add_option("--recording", bi.recording, "Recording id");

  GenTracksArgs gt;
  auto* gen_tracks = app.add_subcommand("gen-tracks", "Synthesize face tracks from a reference RTTM");
  gen_tracks->add_option("--rttm", gt.rttm, "Reference RTTM")->required();
  gen_tracks->add_option("--out", gt.out, "Output JSON lines")->required();
  gen_tracks->add_option("--seed", gt.config.seed, "Random seed");
  gen_tracks->add_option("--visible-prob", gt.config.speaker_visible_prob, "Chance a speaker is on screen");
  gen_tracks->add_option("--segment-prob", gt.config.segment_visible_prob, "Chance a segment is filmed");
  gen_tracks->add_option("--flip-prob", gt.config.activity_flip_prob, "Per-frame activity error rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*simulate) RunSimulate(sim);
    else if (*train) RunTrain(tr);
    else if (*infer) RunInfer(inf);
    else if (*export_emb) RunExportEmb(emb_model, emb_wav, emb_out);
    else if (*vahc) RunVahcCommand(va);
    else if (*fuse) RunFuse(fu);
    else if (*score) RunScore(ref, hyp, collar, as_json);
    else if (*binarize) RunBinarize(bi);
    else if (*gen_tracks) RunGenTracks(gt);
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
