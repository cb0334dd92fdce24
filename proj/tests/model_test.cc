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


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "avdiar/error.h"
#include "avdiar/losses.h"
#include "avdiar/model.h"
#include "doctest.h"
#include "test_util.h"

namespace avdiar {
namespace {

using testing::CheckGradients;
using testing::RandomConst;

ModelConfig ToyConfig(std::string_view preset) {
  ModelConfig c = ModelConfig::Preset(preset);
  c.input_dim = 6;
  c.n_layers = 2;
  c.dim = 4;
  c.n_heads = 2;
  c.ff_dim = 8;
  c.dropout = 0.0;
  c.n_corpus_speakers = 3;
  c.max_decode_speakers = 5;
  return c;
}

Matrix RandomMatrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

Tensor ToTensor(const Matrix& m) {
  return Tensor::FromData({m.rows(), m.cols()}, {m.data().begin(), m.data().end()});
}

void SetParam(EendModel& model, std::string_view name, double value) {
  for (auto& p : model.parameters()) {
    if (p.name == name) {
      for (double& v : p.value.mutable_data()) v = value;
      return;
    }
  }
  FAIL("no parameter " << name);
}

double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST_CASE("model config: presets, validation, json") {
  const ModelConfig base = ModelConfig::Preset("baseline");
  CHECK(!base.use_positional_encoding);
  CHECK(!base.use_attention_eda);
  CHECK(!base.use_speaker_head);
  CHECK(base.dim == 64);
  CHECK(base.n_layers == 2);
  CHECK(base.n_heads == 4);
  CHECK(base.ff_dim == 128);
  CHECK(base.max_decode_speakers == 20);
  const ModelConfig pp = ModelConfig::Preset("plusplus");
  CHECK(pp.use_positional_encoding);
  CHECK(pp.use_attention_eda);
  CHECK(pp.use_speaker_head);
  CHECK(ModelConfig::Preset("att").use_attention_eda);
  CHECK(!ModelConfig::Preset("att").use_speaker_head);
  CHECK(ModelConfig::Preset("spk").use_speaker_head);
  CHECK(!ModelConfig::Preset("spk").use_attention_eda);
  CHECK_THROWS_AS(ModelConfig::Preset("nope"), ConfigError);

  const ModelConfig paper = ModelConfig::PaperScale("plusplus");
  CHECK(paper.n_layers == 4);
  CHECK(paper.dim == 512);
  CHECK(paper.ff_dim == 1024);
  CHECK(paper.n_heads == 8);
  CHECK(paper.dropout == 0.1);
  CHECK_NOTHROW(paper.Validate());

  ModelConfig bad = base;
  bad.n_heads = 3;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
  bad = pp;
  bad.n_corpus_speakers = 0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);

  CHECK(ModelConfig::FromJson(pp.ToJson()) == pp);
  CHECK_THROWS_AS(ModelConfig::FromJson("{not json"), ConfigError);
}

TEST_CASE("encode_frames: shape and width contract") {
  EendModel model(ToyConfig("baseline"), 1);
  std::mt19937_64 rng(2);
  RunContext ctx;
  const Tensor e = model.EncodeFrames(RandomConst({10, 6}, rng), ctx);
  CHECK(e.rows() == 10);
  CHECK(e.cols() == 4);
  CHECK_THROWS_AS(model.EncodeFrames(RandomConst({10, 5}, rng), ctx), ConfigError);
}

TEST_CASE("encode_frames: permutation equivariance holds without positional encoding only") {
  std::mt19937_64 rng(3);
  const Matrix x = RandomMatrix(12, 6, rng);
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix xp(12, 6);
  for (std::size_t t = 0; t < 12; ++t)
    for (std::size_t j = 0; j < 6; ++j) xp(t, j) = x(perm[t], j);

  auto permuted_gap = [&](const ModelConfig& cfg) {
    EendModel model(cfg, 4);
    RunContext c1, c2;
    const Tensor e = model.EncodeFrames(ToTensor(x), c1);
    const Tensor ep = model.EncodeFrames(ToTensor(xp), c2);
    double gap = 0.0;
    for (std::size_t t = 0; t < 12; ++t)
      for (std::size_t d = 0; d < 4; ++d) gap = std::max(gap, std::abs(ep(t, d) - e(perm[t], d)));
    return gap;
  };
  CHECK(permuted_gap(ToyConfig("baseline")) < 1e-12);
  CHECK(permuted_gap(ToyConfig("att")) > 1e-3);
}

TEST_CASE("encode_frames: dropout only in training mode") {
  ModelConfig cfg = ToyConfig("baseline");
  cfg.dropout = 0.3;
  EendModel model(cfg, 5);
  std::mt19937_64 rng(6);
  const Tensor x = RandomConst({8, 6}, rng);
  RunContext eval1, eval2;
  CHECK(MaxAbsDiff(model.EncodeFrames(x, eval1).data(), model.EncodeFrames(x, eval2).data()) == 0.0);
  RunContext train1{true, 11}, train2{true, 11}, train3{true, 12};
  const Tensor a = model.EncodeFrames(x, train1);
  CHECK(MaxAbsDiff(a.data(), model.EncodeFrames(x, train2).data()) == 0.0);
  CHECK(MaxAbsDiff(a.data(), model.EncodeFrames(x, train3).data()) > 1e-6);
}

TEST_CASE("eda_encode: shuffling and single frame") {
  std::mt19937_64 rng(7);
  EendModel vanilla(ToyConfig("baseline"), 8);
  const Tensor e = RandomConst({15, 4}, rng);
  const EdaEncoderStates one = vanilla.EdaEncode(RandomConst({1, 4}, rng), 0);
  CHECK(one.hidden.rows() == 1);
  const EdaEncoderStates s1 = vanilla.EdaEncode(e, 1);
  const EdaEncoderStates s2 = vanilla.EdaEncode(e, 2);
  CHECK(s1.order != s2.order);
  CHECK(MaxAbsDiff(s1.final_h.data(), s2.final_h.data()) > 1e-9);
  CHECK(MaxAbsDiff(s1.final_c.data(), s2.final_c.data()) > 1e-9);
  std::vector<std::size_t> sorted = s1.order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

  EendModel att(ToyConfig("att"), 8);
  const EdaEncoderStates a1 = att.EdaEncode(e, 1);
  const EdaEncoderStates a2 = att.EdaEncode(e, 2);
  CHECK(MaxAbsDiff(a1.hidden.data(), a2.hidden.data()) == 0.0);
  for (std::size_t i = 0; i < a1.order.size(); ++i) CHECK(a1.order[i] == i);
}

TEST_CASE("eda_encode: LSTM step matches an explicit recomputation") {
  std::mt19937_64 rng(9);
  EendModel model(ToyConfig("att"), 10);
  const Tensor e = RandomConst({3, 4}, rng);
  const EdaEncoderStates st = model.EdaEncode(e, 0);
  const Tensor& w_ih = model.param("eda_enc.w_ih");
  const Tensor& w_hh = model.param("eda_enc.w_hh");
  const Tensor& b = model.param("eda_enc.bias");
  const std::size_t d = 4;
  std::vector<double> h(d, 0.0), c(d, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<double> g(4 * d);
    for (std::size_t k = 0; k < 4 * d; ++k) {
      double s = b[k];
      for (std::size_t j = 0; j < d; ++j) s += e(t, j) * w_ih(j, k) + h[j] * w_hh(j, k);
      g[k] = s;
    }
    for (std::size_t j = 0; j < d; ++j) {
      c[j] = sig(g[d + j]) * c[j] + sig(g[j]) * std::tanh(g[2 * d + j]);
      h[j] = sig(g[3 * d + j]) * std::tanh(c[j]);
      CHECK(st.hidden(t, j) == doctest::Approx(h[j]).epsilon(1e-12));
    }
  }
  CHECK(MaxAbsDiff(st.final_c.data(), c) < 1e-12);
}

TEST_CASE("attention_context: singleton, symmetric and recomputed cases") {
  std::mt19937_64 rng(11);
  EendModel model(ToyConfig("att"), 12);
  const Tensor a = RandomConst({1, 4}, rng);
  const Tensor c = RandomConst({1, 4}, rng);

  const Tensor h1 = RandomConst({1, 4}, rng);
  const AttentionOutput single = model.AttentionContext(a, c, h1);
  CHECK(single.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(MaxAbsDiff(single.context.data(), h1.data()) < 1e-15);

  std::vector<double> rep;
  for (int t = 0; t < 6; ++t) rep.insert(rep.end(), h1.data().begin(), h1.data().end());
  const AttentionOutput same = model.AttentionContext(a, c, Tensor::FromData({6, 4}, rep));
  for (int t = 0; t < 6; ++t) CHECK(same.weights[t] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(MaxAbsDiff(same.context.data(), h1.data()) < 1e-12);

  const Tensor h = RandomConst({9, 4}, rng);
  const AttentionOutput out = model.AttentionContext(a, c, h);
  // Independent recomputation of scores, weights and the weighted sum.
  const Tensor& wh = model.param("att.w_h");
  const Tensor& wa = model.param("att.w_a");
  const Tensor& wc = model.param("att.w_c");
  const Tensor& bias = model.param("att.bias");
  const Tensor& v = model.param("att.v");
  std::vector<double> score(9);
  for (std::size_t t = 0; t < 9; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      double pre = bias[k];
      for (std::size_t j = 0; j < 4; ++j) pre += h(t, j) * wh(j, k) + a[j] * wa(j, k) + c[j] * wc(j, k);
      s += v[k] * std::tanh(pre);
    }
    score[t] = s;
  }
  const double mx = *std::max_element(score.begin(), score.end());
  double total = 0.0;
  for (double& s : score) total += (s = std::exp(s - mx));
  double weight_sum = 0.0;
  for (std::size_t t = 0; t < 9; ++t) {
    CHECK(out.weights[t] == doctest::Approx(score[t] / total).epsilon(1e-12));
    weight_sum += out.weights[t];
  }
  CHECK(std::abs(weight_sum - 1.0) < 1e-12);
  for (std::size_t j = 0; j < 4; ++j) {
    double z = 0.0;
    for (std::size_t t = 0; t < 9; ++t) z += out.weights[t] * h(t, j);
    CHECK(out.context[j] == doctest::Approx(z).epsilon(1e-12));
  }
}

TEST_CASE("eda_decode: training emits S+1 attractors; attention rows sum to one") {
  std::mt19937_64 rng(13);
  EendModel model(ToyConfig("plusplus"), 14);
  RunContext ctx;
  const Tensor e = model.EncodeFrames(RandomConst({20, 6}, rng), ctx);
  const EdaEncoderStates st = model.EdaEncode(e, 0);
  const DecodedAttractors dec = model.EdaDecode(st, 3 + 1);
  CHECK(dec.attractors.rows() == 4);
  CHECK(dec.attractors.cols() == 4);
  REQUIRE(dec.attention.rows() == 4);
  CHECK(dec.attention.cols() == 20);
  for (std::size_t s = 0; s < 4; ++s) {
    double total = 0.0;
    for (std::size_t t = 0; t < 20; ++t) total += dec.attention(s, t);
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("eda_decode: vanilla steps see only the encoder final state") {
  std::mt19937_64 rng(15);
  EendModel model(ToyConfig("baseline"), 16);
  EdaEncoderStates st = model.EdaEncode(RandomConst({7, 4}, rng), 3);
  const DecodedAttractors a = model.EdaDecode(st, 3);
  st.hidden = RandomConst({7, 4}, rng);
  const DecodedAttractors b = model.EdaDecode(st, 3);
  CHECK(MaxAbsDiff(a.attractors.data(), b.attractors.data()) == 0.0);
  CHECK(!a.context.defined());

  // Explicit LSTM with zero input from the encoder final state.
  const Tensor& w_hh = model.param("eda_dec.w_hh");
  const Tensor& bias = model.param("eda_dec.bias");
  std::vector<double> h(st.final_h.data().begin(), st.final_h.data().end());
  std::vector<double> c(st.final_c.data().begin(), st.final_c.data().end());
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<double> g(16);
    for (std::size_t k = 0; k < 16; ++k) {
      g[k] = bias[k];
      for (std::size_t j = 0; j < 4; ++j) g[k] += h[j] * w_hh(j, k);
    }
    for (std::size_t j = 0; j < 4; ++j) {
      c[j] = sig(g[4 + j]) * c[j] + sig(g[j]) * std::tanh(g[8 + j]);
      h[j] = sig(g[12 + j]) * std::tanh(c[j]);
      CHECK(a.attractors(s, j) == doctest::Approx(h[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("activity_probs: zero attractor, saturation, recomputation") {
  std::mt19937_64 rng(17);
  EendModel model(ToyConfig("baseline"), 18);
  const Tensor e = RandomConst({5, 4}, rng);
  const Tensor zero = Tensor::Zeros({1, 4});
  const Tensor p0 = model.ActivityProbs(e, zero);
  for (std::size_t t = 0; t < 5; ++t) CHECK(p0(t, 0) == 0.5);

  std::vector<double> unit = {0.5, 0.5, 0.5, 0.5};
  std::vector<double> big = {50, 50, 50, 50};
  const Tensor sat = model.ActivityProbs(Tensor::FromData({1, 4}, unit), Tensor::FromData({1, 4}, big));
  CHECK(std::abs(sat(0, 0) - 1.0) < 1e-9);

  const Tensor a = RandomConst({3, 4}, rng);
  const Tensor p = model.ActivityProbs(e, a);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t s = 0; s < 3; ++s) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 4; ++j) dot += e(t, j) * a(s, j);
      CHECK(p(t, s) == doctest::Approx(1.0 / (1.0 + std::exp(-dot))).epsilon(1e-14));
    }
}

TEST_CASE("speaker_posteriors: uniform with zero weights, rows sum to one, J=1 shape") {
  std::mt19937_64 rng(19);
  EendModel model(ToyConfig("plusplus"), 20);
  SetParam(model, "spk.weight", 0.0);
  SetParam(model, "spk.bias", 0.0);
  const Tensor u = model.SpeakerPosteriors(Tensor::Zeros({2, 4}));
  for (std::size_t j = 0; j < 4; ++j) CHECK(u(0, j) == doctest::Approx(0.25).epsilon(1e-15));

  EendModel fresh(ToyConfig("plusplus"), 21);
  const Tensor p = fresh.SpeakerPosteriors(RandomConst({6, 4}, rng));
  for (std::size_t s = 0; s < 6; ++s) {
    double total = 0.0;
    for (std::size_t j = 0; j < 4; ++j) total += p(s, j);
    CHECK(std::abs(total - 1.0) < 1e-9);
  }

  ModelConfig one = ToyConfig("spk");
  one.n_corpus_speakers = 1;
  EendModel small(one, 22);
  const Tensor q = small.SpeakerPosteriors(RandomConst({3, 4}, rng));
  CHECK(q.rows() == 3);
  CHECK(q.cols() == 2);

  EendModel no_head(ToyConfig("att"), 23);
  CHECK_THROWS_AS(no_head.SpeakerPosteriors(RandomConst({1, 4}, rng)), ContractError);
}

TEST_CASE("infer: stop rules, cap and oracle count") {
  std::mt19937_64 rng(24);
  const Matrix x = RandomMatrix(12, 6, rng);

  EendModel vanilla(ToyConfig("baseline"), 25);
  SetParam(vanilla, "exist.weight", 0.0);
  SetParam(vanilla, "exist.bias", -10.0);
  CHECK(vanilla.Infer(x).attractors.a.rows() == 0);
  CHECK(vanilla.Infer(x).activity.cols() == 0);
  SetParam(vanilla, "exist.bias", 10.0);
  InferenceResult full = vanilla.Infer(x);
  CHECK(full.attractors.a.rows() == 5);
  CHECK(full.activity.rows() == 12);
  CHECK(full.activity.cols() == 5);
  CHECK(vanilla.Infer(x, 2).attractors.a.rows() == 2);
  CHECK_THROWS_AS(vanilla.Infer(x, 6), ContractError);

  // The existence head is ignored when the speaker head is present.
  EendModel pp(ToyConfig("plusplus"), 26);
  SetParam(pp, "exist.bias", -10.0);
  SetParam(pp, "spk.weight", 0.0);
  SetParam(pp, "spk.bias", 0.0);
  CHECK(pp.Infer(x).attractors.a.rows() == 5);  // p(0) = 0.25
  {
    auto& params = pp.parameters();
    for (auto& p : params)
      if (p.name == "spk.bias") p.value.mutable_data()[0] = 10.0;
  }
  CHECK(pp.Infer(x).attractors.a.rows() == 0);

  // Decoding is causal: the stop index does not change earlier attractors.
  EendModel fresh(ToyConfig("att"), 27);
  const InferenceResult r = fresh.Infer(x, 3);
  const InferenceResult r5 = fresh.Infer(x, 5);
  for (std::size_t i = 0; i < r.attractors.a.data().size(); ++i)
    CHECK(r.attractors.a.data()[i] == r5.attractors.a.data()[i]);
  for (std::size_t s = 0; s < r.attractors.attention_weights.rows(); ++s) {
    double total = 0.0;
    for (std::size_t t = 0; t < 12; ++t) total += r.attractors.attention_weights(s, t);
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("checkpoint: byte-identical round trip, same inference, load errors") {
  std::mt19937_64 rng(28);
  EendModel model(ToyConfig("plusplus"), 29);
  const std::string bytes = SerializeModel(model, R"({"epoch":3})");
  LoadedModel loaded = DeserializeModel(bytes);
  CHECK(SerializeModel(loaded.model, loaded.metadata_json) == bytes);
  CHECK(loaded.metadata_json == R"({"epoch":3})");
  CHECK(loaded.model.config() == model.config());

  const Matrix x = RandomMatrix(9, 6, rng);
  const InferenceResult a = model.Infer(x, 2);
  const InferenceResult b = loaded.model.Infer(x, 2);
  CHECK(a.activity == b.activity);
  CHECK(a.embeddings == b.embeddings);

  const auto path = std::filesystem::temp_directory_path() / "avdiar_model_test.ckpt";
  SaveModel(model, path.string());
  CHECK(SerializeModel(LoadModel(path.string()).model) == SerializeModel(model));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(LoadModel(path.string()), LoadError);

  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, std::size_t{30},
                          bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(DeserializeModel(std::string_view(bytes).substr(0, cut)), LoadError);
  }
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(DeserializeModel(bad), LoadError);
  bad = bytes;
  bad[8] = 9;  // version
  CHECK_THROWS_AS(DeserializeModel(bad), LoadError);
  CHECK_THROWS_AS(DeserializeModel(bytes + "x"), LoadError);

  // A header whose config disagrees with the stored tensors.
  ModelConfig other = ToyConfig("plusplus");
  other.ff_dim = 6;
  EendModel mismatched(other, 29);
  const std::string body = SerializeModel(mismatched);
  std::uint64_t body_len = 0, good_len = 0;
  std::memcpy(&body_len, body.data() + 12, 8);
  std::memcpy(&good_len, bytes.data() + 12, 8);
  const std::string spliced = bytes.substr(0, 20 + good_len) + body.substr(20 + body_len);
  CHECK_THROWS_AS(DeserializeModel(spliced), LoadError);
}

// Composite objective on a toy model with the given preset.
Tensor CompositeLoss(const EendModel& model, const Tensor& features, const Matrix& labels,
                     const std::vector<std::size_t>& speaker_ids) {
  RunContext ctx;
  const Tensor e = model.EncodeFrames(features, ctx);
  const EdaEncoderStates st = model.EdaEncode(e, 5);
  const std::size_t s = labels.cols();
  const DecodedAttractors dec = model.EdaDecode(st, s + 1);
  const Tensor active = Slice(dec.attractors, 0, 0, s);
  const Tensor y_hat = model.ActivityProbs(e, active);
  const Tensor dia = DiaBcePit(y_hat, labels, 5.0, PitMode::kExhaustive).loss;
  LossWeights w;
  w.epoch = 2;
  if (!model.config().use_speaker_head) {
    return Add(dia, ExistenceBce(model.ExistenceProbs(dec.attractors)));
  }
  const Tensor post = model.SpeakerPosteriors(dec.attractors);
  const Tensor spk = SpeakerCePit(post, speaker_ids, PitMode::kSinkhorn).loss;
  const Tensor stop = StopCe(Slice(post, 0, s, s + 1));
  return TotalLoss(dia, spk, stop, w, true);
}

TEST_CASE("composite loss gradients through a 2-layer toy model match finite differences") {
  for (const char* preset : {"baseline", "att", "spk", "plusplus"}) {
    CAPTURE(preset);
    std::mt19937_64 rng(30);
    EendModel model(ToyConfig(preset), 31);
    const Tensor x = RandomConst({8, 6}, rng);
    Matrix labels(8, 2);
    for (std::size_t t = 0; t < 8; ++t) {
      labels(t, 0) = t < 5 ? 1.0 : 0.0;
      labels(t, 1) = t >= 3 ? 1.0 : 0.0;
    }
    const std::vector<std::size_t> ids = {2, 3};
    std::vector<Tensor> params;
    for (auto& p : model.parameters()) params.push_back(p.value);
    // Floor 1e-5: some gradients are exactly zero by symmetry (key biases
    // under softmax) and the difference quotient there is pure round-off.
    const auto r = CheckGradients([&] { return CompositeLoss(model, x, labels, ids); }, params,
                                  1e-5, 1e-5);
    CHECK(r.checked > 300);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("composite loss reaches both encoder and decoder parameters") {
  std::mt19937_64 rng(32);
  EendModel model(ToyConfig("plusplus"), 33);
  const Tensor x = RandomConst({10, 6}, rng);
  Matrix labels(10, 2);
  for (std::size_t t = 0; t < 10; ++t) labels(t, t % 2) = 1.0;
  for (auto& p : model.parameters()) p.value.ZeroGrad();
  {
    Tape tape;
    tape.Backward(CompositeLoss(model, x, labels, {1, 2}));
  }
  auto norm = [&](std::string_view name) {
    double s = 0.0;
    for (double g : model.param(name).grad()) s += g * g;
    return std::sqrt(s);
  };
  CHECK(norm("layer0.attn.q.weight") > 0.0);
  CHECK(norm("input.weight") > 0.0);
  CHECK(norm("eda_dec.w_hh") > 0.0);
  CHECK(norm("eda_enc.w_ih") > 0.0);
  CHECK(norm("att.v") > 0.0);
  CHECK(norm("spk.weight") > 0.0);
}

}  // namespace
}  // namespace avdiar
