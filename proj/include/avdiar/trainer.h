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

// Training loop: Adam with the warm-up/inverse-square-root schedule,
// per-epoch speaker-loss weight, validation threshold selection and
// best-checkpoint retention; plus inference helpers and artifact writers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "avdiar/activity.h"
#include "avdiar/eval.h"
#include "avdiar/losses.h"
#include "avdiar/matrix.h"
#include "avdiar/model.h"
#include "avdiar/segments.h"
#include "avdiar/wav.h"

namespace avdiar {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 4;
  int grad_accum = 1;  // optimizer step every batch_size * grad_accum recordings
  int warmup_steps = 200;
  double lr_scale = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  LossWeights weights;
  PitMode pit = PitMode::kSinkhorn;
  SinkhornOptions sinkhorn;
  bool average_dia = true;  // per-frame mean instead of the sum
  double existence_weight = 1.0;  // vanilla/attention modes without the speaker head
  std::vector<double> threshold_grid = {0.3, 0.4, 0.5, 0.6, 0.7};
  int median_frames = 11;
  double collar_s = 0.25;
  int val_every = 1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void Validate() const;
  std::string ToJson() const;
  // Unknown keys raise ConfigError.
  static TrainConfig FromJson(std::string_view text);
};

// dim^-0.5 * min(step^-0.5, step * warmup^-1.5) * scale, step >= 1.
double NoamLearningRate(int dim, int warmup_steps, long step, double scale = 1.0);

// Spliced, subsampled log-mel frames with the per-recording mean of each
// dimension removed.
Matrix ModelFeatures(const Waveform& wave);
inline constexpr double kModelFrameShiftS = 0.1;

struct TrainingExample {
  std::string recording_id;
  Matrix features;  // T x input_dim
  Matrix labels;    // T x S, speakers in first-appearance order
  std::vector<std::string> speakers;
  std::vector<std::size_t> classes;  // speaker-head classes, parallel to speakers
  SegmentList reference;
};

// Reads a simulator manifest; paths resolve against its directory. Class
// labels are required when `need_classes`.
std::vector<TrainingExample> LoadDataset(const std::filesystem::path& manifest, bool need_classes);

// Largest speaker class present, the J the speaker head needs.
std::size_t MaxSpeakerClass(const std::vector<TrainingExample>& data);

class Adam {
 public:
  Adam(std::vector<NamedParameter>& params, double beta1, double beta2, double eps);
  // Applies the accumulated gradients scaled by `grad_scale`, then clears them.
  void Step(double lr, double grad_scale = 1.0);
  long steps() const { return t_; }

 private:
  std::vector<NamedParameter>* params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct LossParts {
  Tensor total;
  double dia = 0.0;
  double existence = 0.0;
  double spk = 0.0;
  double stop = 0.0;
};

// Composite objective for one recording: permutation-free diarization BCE
// plus either the existence BCE or beta(epoch) * (speaker CE + alpha * stop).
LossParts RecordingLoss(const EendModel& model, const TrainingExample& example, const TrainConfig& config,
                        int epoch, RunContext& ctx, std::uint64_t shuffle_seed);

struct Evaluation {
  double der = 0.0;
  double threshold = 0.5;
  CorpusScore score;
};

// Decodes every example, binarizes at each grid threshold and keeps the
// lowest corpus DER (earliest threshold on ties).
Evaluation EvaluateModel(const EendModel& model, const std::vector<TrainingExample>& data,
                         const std::vector<double>& thresholds, int median_frames, double collar_s);

struct EpochLog {
  int epoch = 0;
  double dia_loss = 0.0;
  double existence_loss = 0.0;
  double spk_loss = 0.0;
  double stop_loss = 0.0;
  double beta = 0.0;
  double lr = 0.0;
  std::optional<double> val_der;
  double threshold = 0.0;
};

std::string EpochLogJson(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_der = 0.0;
  double best_threshold = 0.5;
};

// Trains in place. Validation runs on `validation` (or the training data
// when empty) every val_every epochs and after the last one; whenever DER
// improves the model is written to `checkpoint` with its threshold in the
// metadata, and the model is left holding those best weights. A non-finite
// loss raises TrainingError naming the epoch, batch and recording.
TrainResult Train(EendModel& model, const std::vector<TrainingExample>& train,
                  const std::vector<TrainingExample>& validation, const TrainConfig& config,
                  const std::filesystem::path& checkpoint, std::ostream* log_jsonl = nullptr);

// Threshold and median filter stored by Train, with defaults otherwise.
struct DecodeSettings {
  double threshold = 0.5;
  int median_frames = 11;
};
DecodeSettings DecodeSettingsFromMetadata(const std::string& metadata_json);

// Attractor rows: index, existence, [p0..pJ], a0..a{D-1}.
std::string AttractorCsvString(const AttractorSet& attractors);
// Frame rows: t, e0..e{D-1}.
std::string EmbeddingCsvString(const Matrix& embeddings, double frame_shift_s);

}  // namespace avdiar
