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


#include "avdiar/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "avdiar/error.h"
#include "avdiar/features.h"
#include "avdiar/simulator.h"
#include "json.hpp"

namespace avdiar {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

Tensor ToTensor(const Matrix& m) {
  return Tensor::FromData({m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

// Independent 64-bit keys for (seed, epoch, item, purpose).
std::uint64_t Mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = seed;
  for (std::uint64_t v : {a, b, c}) {
    x += 0x9e3779b97f4a7c15ull + v;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x ^= x >> 31;
  }
  return x;
}

std::string FormatNumber(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

// ---- config ------------------------------------------------------------------

void TrainConfig::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("train config: ") + what);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(grad_accum >= 1, "grad_accum must be >= 1");
  require(warmup_steps >= 1, "warmup_steps must be >= 1");
  require(lr_scale > 0.0, "lr_scale must be > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(weights.alpha >= 0.0 && weights.beta0 >= 0.0 && weights.beta_decay > 0.0 && weights.gamma > 0.0,
          "loss weights must be non-negative");
  require(existence_weight >= 0.0, "existence_weight must be >= 0");
  require(!threshold_grid.empty(), "threshold_grid must not be empty");
  for (double t : threshold_grid) require(t > 0.0 && t < 1.0, "thresholds must be in (0, 1)");
  require(median_frames >= 1 && median_frames % 2 == 1, "median_frames must be odd and >= 1");
  require(collar_s >= 0.0, "collar_s must be >= 0");
  require(val_every >= 1, "val_every must be >= 1");
  require(sinkhorn.temperature > 0.0 && sinkhorn.iterations >= 1, "bad sinkhorn settings");
}

std::string TrainConfig::ToJson() const {
  ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["grad_accum"] = grad_accum;
  j["warmup_steps"] = warmup_steps;
  j["lr_scale"] = lr_scale;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["alpha"] = weights.alpha;
  j["beta0"] = weights.beta0;
  j["beta_decay"] = weights.beta_decay;
  j["gamma"] = weights.gamma;
  j["pit"] = pit == PitMode::kSinkhorn ? "sinkhorn" : "exhaustive";
  j["sinkhorn_temperature"] = sinkhorn.temperature;
  j["sinkhorn_iterations"] = sinkhorn.iterations;
  j["average_dia"] = average_dia;
  j["existence_weight"] = existence_weight;
  j["threshold_grid"] = threshold_grid;
  j["median_frames"] = median_frames;
  j["collar_s"] = collar_s;
  j["val_every"] = val_every;
  j["seed"] = seed;
  return j.dump(2);
}

TrainConfig TrainConfig::FromJson(std::string_view text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("train config must be a json object");
    for (const auto& [k, v] : j.items()) {
      if (k == "epochs") c.epochs = v.get<int>();
      else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "grad_accum") c.grad_accum = v.get<int>();
      else if (k == "warmup_steps") c.warmup_steps = v.get<int>();
      else if (k == "lr_scale") c.lr_scale = v.get<double>();
      else if (k == "adam_beta1") c.adam_beta1 = v.get<double>();
      else if (k == "adam_beta2") c.adam_beta2 = v.get<double>();
      else if (k == "adam_eps") c.adam_eps = v.get<double>();
      else if (k == "alpha") c.weights.alpha = v.get<double>();
      else if (k == "beta0") c.weights.beta0 = v.get<double>();
      else if (k == "beta_decay") c.weights.beta_decay = v.get<double>();
      else if (k == "gamma") c.weights.gamma = v.get<double>();
      else if (k == "pit") {
        const std::string mode = v.get<std::string>();
        if (mode == "sinkhorn") c.pit = PitMode::kSinkhorn;
        else if (mode == "exhaustive") c.pit = PitMode::kExhaustive;
        else throw ConfigError("train config: pit must be sinkhorn or exhaustive");
      } else if (k == "sinkhorn_temperature") c.sinkhorn.temperature = v.get<double>();
      else if (k == "sinkhorn_iterations") c.sinkhorn.iterations = v.get<int>();
      else if (k == "average_dia") c.average_dia = v.get<bool>();
      else if (k == "existence_weight") c.existence_weight = v.get<double>();
      else if (k == "threshold_grid") c.threshold_grid = v.get<std::vector<double>>();
      else if (k == "median_frames") c.median_frames = v.get<int>();
      else if (k == "collar_s") c.collar_s = v.get<double>();
      else if (k == "val_every") c.val_every = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown train config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config json: ") + e.what());
  }
  c.Validate();
  return c;
}

double NoamLearningRate(int dim, int warmup_steps, long step, double scale) {
  if (dim < 1 || warmup_steps < 1 || step < 1) throw ContractError("learning rate needs dim, warmup, step >= 1");
  const double s = static_cast<double>(step);
  return scale / std::sqrt(static_cast<double>(dim)) *
         std::min(1.0 / std::sqrt(s), s * std::pow(static_cast<double>(warmup_steps), -1.5));
}

// ---- data ------------------------------------------------------------------------

Matrix ModelFeatures(const Waveform& wave) {
  Matrix f = ComputeModelFeatures(wave).frames;
  const std::size_t t_len = f.rows(), d = f.cols();
  if (t_len == 0) return f;
  std::vector<double> mean(d, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += f(t, j);
  }
  for (double& m : mean) m /= static_cast<double>(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < d; ++j) f(t, j) -= mean[j];
  }
  return f;
}

std::vector<TrainingExample> LoadDataset(const fs::path& manifest, bool need_classes) {
  const fs::path base = manifest.parent_path();
  std::vector<TrainingExample> out;
  for (const ManifestEntry& e : ReadManifest(manifest)) {
    TrainingExample ex;
    ex.recording_id = e.recording_id;
    ex.features = ModelFeatures(ReadWav(base / e.wav));
    SegmentList ref;
    for (Segment& s : ReadRttm(base / e.rttm)) {
      if (s.recording == e.recording_id) ref.push_back(std::move(s));
    }
    SortSegments(ref);
    ex.reference = ref;
    ex.speakers = SpeakerOrder(ref);
    ex.labels = SegmentsToFrames(ref, ex.speakers, kModelFrameShiftS, ex.features.rows());
    if (need_classes) {
      if (e.labels.empty()) throw InputError("manifest entry " + e.recording_id + " has no speaker label file");
      const auto classes = ReadSpeakerLabels(base / e.labels);
      for (const auto& spk : ex.speakers) {
        auto it = classes.find(spk);
        if (it == classes.end() || it->second == 0) {
          throw InputError("no speaker class for " + spk + " in " + (base / e.labels).string());
        }
        ex.classes.push_back(it->second);
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::size_t MaxSpeakerClass(const std::vector<TrainingExample>& data) {
  std::size_t j = 0;
  for (const auto& ex : data) {
    for (std::size_t c : ex.classes) j = std::max(j, c);
  }
  return j;
}

// ---- optimizer --------------------------------------------------------------------

Adam::Adam(std::vector<NamedParameter>& params, double beta1, double beta2, double eps)
    : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::Step(double lr, double grad_scale) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_->size(); ++k) {
    Tensor& p = (*params_)[k].value;
    const std::span<const double> g = p.grad();
    if (g.empty()) continue;
    std::span<double> w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * grad_scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    p.ZeroGrad();
  }
}

// ---- loss ---------------------------------------------------------------------------

LossParts RecordingLoss(const EendModel& model, const TrainingExample& ex, const TrainConfig& config, int epoch,
                        RunContext& ctx, std::uint64_t shuffle_seed) {
  const ModelConfig& mc = model.config();
  const std::size_t s = ex.labels.cols();
  const Tensor e = model.EncodeFrames(ToTensor(ex.features), ctx);
  const EdaEncoderStates st = model.EdaEncode(e, shuffle_seed);
  const DecodedAttractors dec = model.EdaDecode(st, s + 1);
  LossParts parts;
  Tensor dia = Tensor::Scalar(0.0);
  if (s > 0) {
    const Tensor y_hat = model.ActivityProbs(e, Slice(dec.attractors, 0, 0, s));
    dia = DiaBcePit(y_hat, ex.labels, config.weights.gamma, config.pit, config.sinkhorn, config.average_dia).loss;
  }
  parts.dia = dia.item();
  if (!mc.use_speaker_head) {
    const Tensor exist = ExistenceBce(model.ExistenceProbs(dec.attractors));
    parts.existence = exist.item();
    parts.total = Add(dia, Scale(exist, config.existence_weight));
    return parts;
  }
  if (ex.classes.size() != s) throw InputError("recording " + ex.recording_id + " lacks speaker classes");
  for (std::size_t c : ex.classes) {
    if (c > static_cast<std::size_t>(mc.n_corpus_speakers)) {
      throw ConfigError("speaker class " + std::to_string(c) + " exceeds the model's " +
                        std::to_string(mc.n_corpus_speakers) + " corpus speakers");
    }
  }
  const Tensor post = model.SpeakerPosteriors(dec.attractors);
  Tensor spk = Tensor::Scalar(0.0);
  if (s > 0) spk = SpeakerCePit(Slice(post, 0, 0, s), ex.classes, config.pit, config.sinkhorn).loss;
  const Tensor stop = StopCe(Slice(post, 0, s, s + 1));
  parts.spk = spk.item();
  parts.stop = stop.item();
  LossWeights w = config.weights;
  w.epoch = epoch;
  parts.total = TotalLoss(dia, spk, stop, w, true);
  return parts;
}

// ---- evaluation ---------------------------------------------------------------------

Evaluation EvaluateModel(const EendModel& model, const std::vector<TrainingExample>& data,
                         const std::vector<double>& thresholds, int median_frames, double collar_s) {
  if (thresholds.empty()) throw ContractError("threshold grid is empty");
  SegmentList ref;
  std::vector<ActivityMatrix> activity;
  for (const auto& ex : data) {
    ref.insert(ref.end(), ex.reference.begin(), ex.reference.end());
    ActivityMatrix a;
    a.frame_shift_s = kModelFrameShiftS;
    a.probs = model.Infer(ex.features).activity;
    activity.push_back(std::move(a));
  }
  Evaluation best;
  bool first = true;
  for (double th : thresholds) {
    SegmentList hyp;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const SegmentList h = Binarize(activity[i], th, median_frames, data[i].recording_id);
      hyp.insert(hyp.end(), h.begin(), h.end());
    }
    CorpusScore score = ScoreCorpus(ref, hyp, collar_s);
    if (first || score.total.der < best.der) {
      best.der = score.total.der;
      best.threshold = th;
      best.score = std::move(score);
      first = false;
    }
  }
  return best;
}

// ---- training -------------------------------------------------------------------------

std::string EpochLogJson(const EpochLog& log) {
  ordered_json j;
  j["epoch"] = log.epoch;
  j["dia_loss"] = log.dia_loss;
  j["existence_loss"] = log.existence_loss;
  j["spk_loss"] = log.spk_loss;
  j["stop_loss"] = log.stop_loss;
  j["beta"] = log.beta;
  j["lr"] = log.lr;
  j["val_der"] = log.val_der ? json(*log.val_der) : json(nullptr);
  j["threshold"] = log.threshold;
  return j.dump();
}

TrainResult Train(EendModel& model, const std::vector<TrainingExample>& train,
                  const std::vector<TrainingExample>& validation, const TrainConfig& config,
                  const fs::path& checkpoint, std::ostream* log_jsonl) {
  config.Validate();
  if (train.empty()) throw InputError("training set is empty");
  const std::vector<TrainingExample>& val = validation.empty() ? train : validation;
  Adam adam(model.parameters(), config.adam_beta1, config.adam_beta2, config.adam_eps);
  for (auto& p : model.parameters()) p.value.ZeroGrad();
  const std::size_t per_step = static_cast<std::size_t>(config.batch_size) * config.grad_accum;

  TrainResult result;
  std::string best_bytes;
  bool have_best = false;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle(Mix(config.seed, 1, epoch, 0));
    std::shuffle(order.begin(), order.end(), shuffle);
    EpochLog log;
    log.epoch = epoch + 1;
    LossWeights w = config.weights;
    w.epoch = epoch;
    log.beta = model.config().use_speaker_head ? w.beta() : 0.0;
    std::size_t pending = 0;
    auto step = [&] {
      if (pending == 0) return;
      log.lr = NoamLearningRate(model.config().dim, config.warmup_steps, adam.steps() + 1, config.lr_scale);
      adam.Step(log.lr, 1.0 / static_cast<double>(pending));
      pending = 0;
    };
    for (std::size_t k = 0; k < order.size(); ++k) {
      const TrainingExample& ex = train[order[k]];
      RunContext ctx;
      ctx.train = true;
      ctx.seed = Mix(config.seed, 2, epoch, order[k]);
      const std::string where = "epoch " + std::to_string(epoch + 1) + ", batch " +
                                std::to_string(k / config.batch_size) + " (recording " + ex.recording_id + ")";
      LossParts parts;
      try {
        Tape tape;
        parts = RecordingLoss(model, ex, config, epoch, ctx, Mix(config.seed, 3, epoch, order[k]));
        if (!std::isfinite(parts.total.item())) throw TrainingError("non-finite loss at " + where);
        tape.Backward(parts.total);
      } catch (const ContractError& e) {
        // Ops refuse to produce NaN/inf; report those as a diverged batch.
        if (std::string_view(e.what()).find("non-finite") == std::string_view::npos) throw;
        throw TrainingError("non-finite loss at " + where + ": " + e.what());
      }
      const double n = static_cast<double>(train.size());
      log.dia_loss += parts.dia / n;
      log.existence_loss += parts.existence / n;
      log.spk_loss += parts.spk / n;
      log.stop_loss += parts.stop / n;
      if (++pending == per_step) step();
    }
    step();

    const bool last = epoch + 1 == config.epochs;
    if ((epoch + 1) % config.val_every == 0 || last) {
      const Evaluation ev = EvaluateModel(model, val, config.threshold_grid, config.median_frames, config.collar_s);
      log.val_der = ev.der;
      log.threshold = ev.threshold;
      if (!have_best || ev.der < result.best_der) {
        have_best = true;
        result.best_der = ev.der;
        result.best_epoch = epoch + 1;
        result.best_threshold = ev.threshold;
        ordered_json meta;
        meta["threshold"] = ev.threshold;
        meta["median_frames"] = config.median_frames;
        meta["epoch"] = epoch + 1;
        meta["val_der"] = ev.der;
        best_bytes = SerializeModel(model, meta.dump());
        if (!checkpoint.empty()) {
          std::ofstream out(checkpoint, std::ios::binary);
          if (!out) throw IoError("cannot write checkpoint " + checkpoint.string());
          out << best_bytes;
          if (!out) throw IoError("write failed: " + checkpoint.string());
        }
      }
    }
    result.log.push_back(log);
    if (log_jsonl) *log_jsonl << EpochLogJson(log) << "\n" << std::flush;
  }
  if (have_best) {
    LoadedModel best = DeserializeModel(best_bytes);
    for (std::size_t k = 0; k < model.parameters().size(); ++k) {
      const auto src = best.model.parameters()[k].value.data();
      auto dst = model.parameters()[k].value.mutable_data();
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return result;
}

DecodeSettings DecodeSettingsFromMetadata(const std::string& metadata_json) {
  DecodeSettings d;
  try {
    const json j = json::parse(metadata_json);
    if (j.contains("threshold")) d.threshold = j.at("threshold").get<double>();
    if (j.contains("median_frames")) d.median_frames = j.at("median_frames").get<int>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint metadata: ") + e.what());
  }
  return d;
}

// ---- artifacts ------------------------------------------------------------------------

std::string AttractorCsvString(const AttractorSet& a) {
  std::string out = "index,existence";
  const std::size_t classes = a.speaker_posteriors.cols();
  for (std::size_t j = 0; j < classes; ++j) out += ",p" + std::to_string(j);
  for (std::size_t d = 0; d < a.a.cols(); ++d) out += ",a" + std::to_string(d);
  out += "\n";
  char buf[40];
  for (std::size_t s = 0; s < a.a.rows(); ++s) {
    out += std::to_string(s);
    std::snprintf(buf, sizeof(buf), ",%.17g", a.existence_probs[s]);
    out += buf;
    for (std::size_t j = 0; j < classes; ++j) {
      std::snprintf(buf, sizeof(buf), ",%.17g", a.speaker_posteriors(s, j));
      out += buf;
    }
    for (std::size_t d = 0; d < a.a.cols(); ++d) {
      std::snprintf(buf, sizeof(buf), ",%.17g", a.a(s, d));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string EmbeddingCsvString(const Matrix& e, double frame_shift_s) {
  std::string out = "t";
  for (std::size_t d = 0; d < e.cols(); ++d) out += ",e" + std::to_string(d);
  out += "\n";
  char buf[40];
  for (std::size_t t = 0; t < e.rows(); ++t) {
    out += FormatNumber(static_cast<double>(t) * frame_shift_s);
    for (std::size_t d = 0; d < e.cols(); ++d) {
      std::snprintf(buf, sizeof(buf), ",%.17g", e(t, d));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace avdiar
