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

// Self-attentive frame encoder plus the encoder-decoder attractor module.
//
// Four configurations are reachable through flags alone:
//   baseline   no positional encoding, shuffled EDA input, zero decoder input
//   att        positional encoding, unshuffled EDA, attention context input
//   spk        baseline plus the speaker classification head
//   plusplus   att plus the speaker classification head

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avdiar/matrix.h"
#include "avdiar/tensor.h"

namespace avdiar {

struct ModelConfig {
  int input_dim = 600;
  int n_layers = 2;
  int dim = 64;
  int n_heads = 4;
  int ff_dim = 128;
  double dropout = 0.1;
  bool use_positional_encoding = false;
  bool use_attention_eda = false;
  bool use_speaker_head = false;
  // J; the speaker head has J + 1 classes, class 0 is "not a speaker".
  int n_corpus_speakers = 1;
  int max_decode_speakers = 20;
  double existence_threshold = 0.5;
  double stop_class_threshold = 0.5;

  // Throws ConfigError.
  void Validate() const;

  // Desk-scale presets: "baseline", "att", "spk", "plusplus".
  static ModelConfig Preset(std::string_view name);
  // Same flags at 4 layers, D=512, 8 heads, ff 1024.
  static ModelConfig PaperScale(std::string_view name);

  std::string ToJson() const;
  static ModelConfig FromJson(std::string_view text);
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

// Per-call state for stochastic ops. Dropout draws are keyed by
// (seed, running op counter), so a forward pass is a pure function of its
// inputs and this context.
struct RunContext {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t next_op = 0;

  DropoutKey NextDropout() { return {train, seed, next_op++}; }
};

struct EdaEncoderStates {
  Tensor hidden;  // T x D, every encoder step in processing order
  Tensor final_h;  // 1 x D
  Tensor final_c;  // 1 x D
  // order[k] = input frame consumed at step k; identity without shuffling.
  std::vector<std::size_t> order;
};

struct AttentionOutput {
  Tensor context;  // 1 x D
  Tensor weights;  // 1 x T
};

struct DecodedAttractors {
  Tensor attractors;  // n x D
  Tensor context;  // n x D, attention mode only
  Tensor attention;  // n x T, attention mode only
};

// Plain-value view of decoded attractors for inference and export.
struct AttractorSet {
  Matrix a;  // S_dec x D
  std::vector<double> existence_probs;
  Matrix speaker_posteriors;  // S_dec x (J+1), speaker head only
  Matrix context_vectors;  // S_dec x D, attention mode only
  Matrix attention_weights;  // S_dec x T, attention mode only
};

struct InferenceResult {
  Matrix embeddings;  // T x D
  AttractorSet attractors;
  Matrix activity;  // T x S_dec
};

struct NamedParameter {
  std::string name;
  Tensor value;
};

class EendModel {
 public:
  // Weights drawn from a seeded uniform Xavier initializer.
  EendModel(const ModelConfig& config, std::uint64_t init_seed);
  // Parameters are shared handles, so copies would alias weights.
  EendModel(const EendModel&) = delete;
  EendModel& operator=(const EendModel&) = delete;
  EendModel(EendModel&&) = default;
  EendModel& operator=(EendModel&&) = default;

  const ModelConfig& config() const { return config_; }
  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const Tensor& param(std::string_view name) const;

  // features: T x input_dim -> T x D.
  Tensor EncodeFrames(const Tensor& features, RunContext& ctx) const;

  // Runs the EDA LSTM encoder. Frames are shuffled with `shuffle_seed`
  // unless attention EDA is enabled.
  EdaEncoderStates EdaEncode(const Tensor& embeddings, std::uint64_t shuffle_seed) const;

  // w = softmax_t(v^T tanh(W_h h_t + W_a a + W_c c + b)), z = Σ_t w_t h_t.
  AttentionOutput AttentionContext(const Tensor& a_prev, const Tensor& c_prev,
                                   const Tensor& encoder_hidden) const;

  // Exactly `count` decoder steps (training decodes S + 1).
  DecodedAttractors EdaDecode(const EdaEncoderStates& states, std::size_t count) const;

  // sigmoid(E A^T): T x S.
  Tensor ActivityProbs(const Tensor& embeddings, const Tensor& attractors) const;
  // n x 1.
  Tensor ExistenceProbs(const Tensor& attractors) const;
  // n x (J+1), rows sum to one. Requires the speaker head.
  Tensor SpeakerPosteriors(const Tensor& attractors) const;

  // Decodes until the stop rule fires (existence below threshold, or class 0
  // above threshold with the speaker head) or max_decode_speakers is
  // reached. With `oracle_speakers` exactly that many are decoded.
  InferenceResult Infer(const Matrix& features, std::optional<std::size_t> oracle_speakers = {},
                        std::uint64_t shuffle_seed = 0) const;

 private:
  // Uniform in ±sqrt(6 / (fan_in + fan_out)); fan_in 0 gives a fill of `fill`.
  Tensor AddParam(std::string name, Shape shape, double fan_in, double fan_out,
                  double fill = 0.0);
  Tensor Linear(const Tensor& x, const std::string& prefix) const;
  Tensor Norm(const Tensor& x, const std::string& prefix) const;
  Tensor SelfAttention(const Tensor& x, int layer, RunContext& ctx) const;
  Tensor FeedForward(const Tensor& x, int layer, RunContext& ctx) const;
  // One LSTM step given the precomputed input projection row.
  std::pair<Tensor, Tensor> LstmStep(const Tensor& input_proj, const Tensor& h, const Tensor& c,
                                     const std::string& prefix) const;
  AttractorSet ToAttractorSet(const DecodedAttractors& decoded) const;

  ModelConfig config_;
  std::vector<NamedParameter> params_;
  std::mt19937_64 init_rng_;
};

// Sinusoidal positional encoding table, T x D.
Matrix PositionalEncoding(std::size_t frames, std::size_t dim);

// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> ShuffledOrder(std::size_t n, std::uint64_t seed);

// Checkpoint container, little-endian:
//   "AVDRCKPT" | u32 version | u64 json length | json header
//   | u32 tensor count | per tensor: u32 name length, name, u32 rank,
//     u64 dims[rank], f64 data[prod(dims)]
// The JSON header holds {"config": ..., "metadata": ...}.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveModel(const EendModel& model, const std::string& path,
               const std::string& metadata_json = "{}");
std::string SerializeModel(const EendModel& model, const std::string& metadata_json = "{}");

struct LoadedModel {
  EendModel model;
  std::string metadata_json;
};

// Throws LoadError on bad magic, version, truncation, or a tensor whose
// name or shape does not match the configuration.
LoadedModel LoadModel(const std::string& path);
LoadedModel DeserializeModel(std::string_view bytes);

}  // namespace avdiar
