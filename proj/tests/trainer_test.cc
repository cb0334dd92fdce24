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


#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "avdiar/error.h"
#include "avdiar/model.h"
#include "avdiar/simulator.h"
#include "avdiar/trainer.h"
#include "doctest.h"

namespace avdiar {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avdiar_train_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Two 10 s two-speaker recordings, emitted once.
const fs::path& TinyManifest() {
  static const fs::path manifest = [] {
    const fs::path dir = TempDir("data");
    SimConfig c;
    c.recording_len_s = 10.0;
    c.n_speakers_min = 2;
    c.n_speakers_max = 2;
    c.seed = 3;
    EmitDataset(c, MakeSyntheticCorpus({}), 2, dir);
    return dir / "manifest.json";
  }();
  return manifest;
}

const std::vector<TrainingExample>& Tiny() {
  static const std::vector<TrainingExample> data = LoadDataset(TinyManifest(), true);
  return data;
}

ModelConfig DeskModel(const std::string& preset) {
  ModelConfig mc = ModelConfig::Preset(preset);
  if (mc.use_speaker_head) mc.n_corpus_speakers = static_cast<int>(MaxSpeakerClass(Tiny()));
  return mc;
}

TEST_CASE("learning rate at the end of warm-up") {
  for (int dim : {64, 512}) {
    for (int warmup : {200, 10000}) {
      const double expect = 1.0 / std::sqrt(static_cast<double>(dim)) / std::sqrt(static_cast<double>(warmup));
      CHECK(NoamLearningRate(dim, warmup, warmup) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  // Rising linearly before, decaying as step^-0.5 after.
  CHECK(NoamLearningRate(64, 200, 100) == doctest::Approx(NoamLearningRate(64, 200, 200) / 2));
  CHECK(NoamLearningRate(64, 200, 800) == doctest::Approx(NoamLearningRate(64, 200, 200) / 2));
  CHECK(NoamLearningRate(64, 200, 10, 2.0) == doctest::Approx(2 * NoamLearningRate(64, 200, 10)));
}

TEST_CASE("config json round trip and validation") {
  TrainConfig c;
  c.epochs = 7;
  c.weights.beta_decay = 0.99;
  c.threshold_grid = {0.4, 0.5};
  c.pit = PitMode::kExhaustive;
  const TrainConfig d = TrainConfig::FromJson(c.ToJson());
  CHECK(d.ToJson() == c.ToJson());
  CHECK(d.epochs == 7);
  CHECK(d.weights.beta_decay == 0.99);
  CHECK_THROWS_AS(TrainConfig::FromJson(R"({"epochz": 3})"), ConfigError);
  TrainConfig bad;
  bad.warmup_steps = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("dataset loads labels, classes and features") {
  const auto& data = Tiny();
  REQUIRE(data.size() == 2);
  for (const auto& ex : data) {
    CHECK(ex.features.rows() == 100);
    CHECK(ex.labels.rows() == ex.features.rows());
    CHECK(ex.labels.cols() == 2);
    CHECK(ex.classes.size() == 2);
    for (std::size_t c : ex.classes) CHECK(c >= 1);
  }
}

TEST_CASE("one epoch writes a checkpoint and a log") {
  const fs::path dir = TempDir("smoke");
  EendModel model(DeskModel("plusplus"), 1);
  TrainConfig tc;
  tc.epochs = 1;
  std::ostringstream log;
  const TrainResult r = Train(model, Tiny(), {}, tc, dir / "m.ckpt", &log);
  REQUIRE(fs::exists(dir / "m.ckpt"));
  CHECK(r.log.size() == 1);
  CHECK(r.best_epoch == 1);
  CHECK(log.str().find("\"val_der\"") != std::string::npos);
  CHECK(r.log[0].beta == doctest::Approx(0.1));
  const LoadedModel loaded = LoadModel((dir / "m.ckpt").string());
  CHECK(loaded.model.config() == model.config());
  CHECK(DecodeSettingsFromMetadata(loaded.metadata_json).threshold == r.best_threshold);
}

TEST_CASE("beta decays per epoch") {
  EendModel model(DeskModel("spk"), 1);
  TrainConfig tc;
  tc.epochs = 3;
  tc.val_every = 100;
  const TrainResult r = Train(model, Tiny(), {}, tc, "");
  REQUIRE(r.log.size() == 3);
  CHECK(r.log[2].beta == doctest::Approx(0.1 * 0.92 * 0.92));
}

TEST_CASE("loss falls below a tenth after 50 epochs on one recording") {
  const std::vector<TrainingExample> one = {Tiny()[0]};
  EendModel model(DeskModel("plusplus"), 2);
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 1;
  tc.warmup_steps = 50;  // one step per epoch
  tc.val_every = 1000;
  const TrainResult r = Train(model, one, {}, tc, "");
  auto total = [&](const EpochLog& l) {
    return l.dia_loss + l.beta * (l.spk_loss + tc.weights.alpha * l.stop_loss);
  };
  CHECK(total(r.log.back()) < 0.1 * total(r.log.front()));
}

TEST_CASE("training is deterministic") {
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 5;
  EendModel a(DeskModel("plusplus"), 4), b(DeskModel("plusplus"), 4);
  const TrainResult ra = Train(a, Tiny(), {}, tc, "");
  const TrainResult rb = Train(b, Tiny(), {}, tc, "");
  CHECK(SerializeModel(a) == SerializeModel(b));
  CHECK(EpochLogJson(ra.log.back()) == EpochLogJson(rb.log.back()));
}

TEST_CASE("one step moves encoder and decoder weights") {
  EendModel model(DeskModel("plusplus"), 6);
  for (auto& p : model.parameters()) p.value.ZeroGrad();
  RunContext ctx;
  ctx.train = true;
  TrainConfig tc;
  {
    Tape tape;
    LossParts parts = RecordingLoss(model, Tiny()[0], tc, 0, ctx, 9);
    tape.Backward(parts.total);
  }
  auto norm = [&](const std::string& name) {
    double s = 0.0;
    for (double g : model.param(name).grad()) s += g * g;
    return std::sqrt(s);
  };
  CHECK(norm("layer0.attn.q.weight") > 0.0);
  CHECK(norm("input.weight") > 0.0);
  CHECK(norm("eda_dec.w_ih") > 0.0);
  CHECK(norm("eda_enc.w_ih") > 0.0);
  CHECK(norm("spk.weight") > 0.0);
}

TEST_CASE("non-finite loss aborts naming the batch") {
  std::vector<TrainingExample> data = Tiny();
  data[1].features(3, 4) = std::numeric_limits<double>::quiet_NaN();
  EendModel model(DeskModel("baseline"), 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 1;
  tc.seed = 0;
  try {
    Train(model, data, {}, tc, "");
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find(data[1].recording_id) != std::string::npos);
  }
}

TEST_CASE("inference shape and speaker cap") {
  ModelConfig mc = DeskModel("plusplus");
  mc.max_decode_speakers = 3;
  EendModel model(mc, 8);
  const auto& ex = Tiny()[0];
  const InferenceResult r = model.Infer(ex.features);
  CHECK(r.activity.rows() == ex.features.rows());
  CHECK(r.embeddings.rows() == ex.features.rows());
  CHECK(r.activity.cols() <= 3);
  const InferenceResult o = model.Infer(ex.features, 2);
  CHECK(o.activity.cols() == 2);
  const InferenceResult again = model.Infer(ex.features);
  CHECK(AttractorCsvString(again.attractors) == AttractorCsvString(r.attractors));
  CHECK(EmbeddingCsvString(again.embeddings, kModelFrameShiftS) ==
        EmbeddingCsvString(r.embeddings, kModelFrameShiftS));
}

TEST_CASE("empty training set is rejected") {
  EendModel model(DeskModel("baseline"), 1);
  CHECK_THROWS_AS(Train(model, {}, {}, TrainConfig{}, ""), InputError);
}

TEST_CASE("speaker head requires class labels within range") {
  ModelConfig mc = DeskModel("spk");
  mc.n_corpus_speakers = 1;
  EendModel model(mc, 1);
  TrainConfig tc;
  tc.epochs = 1;
  if (MaxSpeakerClass(Tiny()) > 1) CHECK_THROWS_AS(Train(model, Tiny(), {}, tc, ""), ConfigError);
}

}  // namespace
}  // namespace avdiar
