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


#include "avdiar/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "avdiar/error.h"
#include "json.hpp"

namespace avdiar {
namespace {

using nlohmann::json;

Tensor MatrixToTensor(const Matrix& m) {
  return Tensor::FromData({m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

Matrix TensorToMatrix(const Tensor& t) {
  return Matrix(t.rows(), t.cols(), std::vector<double>(t.data().begin(), t.data().end()));
}

}  // namespace

// ---- config ----------------------------------------------------------------

void ModelConfig::Validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (input_dim < 1) fail("input_dim must be positive");
  if (n_layers < 0) fail("n_layers must be non-negative");
  if (dim < 1) fail("dim must be positive");
  if (n_heads < 1 || dim % n_heads != 0) {
    fail("dim " + std::to_string(dim) + " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (ff_dim < 1) fail("ff_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (use_speaker_head && n_corpus_speakers < 1) fail("speaker head needs n_corpus_speakers >= 1");
  if (max_decode_speakers < 1) fail("max_decode_speakers must be positive");
  if (!(existence_threshold > 0.0 && existence_threshold < 1.0)) fail("existence_threshold must be in (0, 1)");
  if (!(stop_class_threshold > 0.0 && stop_class_threshold < 1.0)) fail("stop_class_threshold must be in (0, 1)");
}

ModelConfig ModelConfig::Preset(std::string_view name) {
  ModelConfig c;
  if (name == "baseline") {
  } else if (name == "att") {
    c.use_positional_encoding = true;
    c.use_attention_eda = true;
  } else if (name == "spk") {
    c.use_speaker_head = true;
  } else if (name == "plusplus") {
    c.use_positional_encoding = true;
    c.use_attention_eda = true;
    c.use_speaker_head = true;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) +
                      "' (expected baseline, att, spk or plusplus)");
  }
  return c;
}

ModelConfig ModelConfig::PaperScale(std::string_view name) {
  ModelConfig c = Preset(name);
  c.n_layers = 4;
  c.dim = 512;
  c.n_heads = 8;
  c.ff_dim = 1024;
  return c;
}

std::string ModelConfig::ToJson() const {
  json j = {{"input_dim", input_dim},
            {"n_layers", n_layers},
            {"dim", dim},
            {"n_heads", n_heads},
            {"ff_dim", ff_dim},
            {"dropout", dropout},
            {"use_positional_encoding", use_positional_encoding},
            {"use_attention_eda", use_attention_eda},
            {"use_speaker_head", use_speaker_head},
            {"n_corpus_speakers", n_corpus_speakers},
            {"max_decode_speakers", max_decode_speakers},
            {"existence_threshold", existence_threshold},
            {"stop_class_threshold", stop_class_threshold}};
  return j.dump();
}

ModelConfig ModelConfig::FromJson(std::string_view text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("input_dim", c.input_dim);
    get("n_layers", c.n_layers);
    get("dim", c.dim);
    get("n_heads", c.n_heads);
    get("ff_dim", c.ff_dim);
    get("dropout", c.dropout);
    get("use_positional_encoding", c.use_positional_encoding);
    get("use_attention_eda", c.use_attention_eda);
    get("use_speaker_head", c.use_speaker_head);
    get("n_corpus_speakers", c.n_corpus_speakers);
    get("max_decode_speakers", c.max_decode_speakers);
    get("existence_threshold", c.existence_threshold);
    get("stop_class_threshold", c.stop_class_threshold);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config json: ") + e.what());
  }
  c.Validate();
  return c;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) { return a.ToJson() == b.ToJson(); }

// ---- helpers ---------------------------------------------------------------

Matrix PositionalEncoding(std::size_t frames, std::size_t dim) {
  Matrix pe(frames, dim);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      pe(t, i) = std::sin(angle);
      if (i + 1 < dim) pe(t, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

std::vector<std::size_t> ShuffledOrder(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

// ---- model -----------------------------------------------------------------

Tensor EendModel::AddParam(std::string name, Shape shape, double fan_in, double fan_out,
                           double fill) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> data(n, fill);
  if (fan_in > 0) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : data) v = u(init_rng_);
  }
  Tensor t = Tensor::Parameter(std::move(shape), std::move(data));
  params_.push_back({std::move(name), t});
  return t;
}

EendModel::EendModel(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config), init_rng_(init_seed) {
  config_.Validate();
  const std::size_t d = config_.dim, in = config_.input_dim, ff = config_.ff_dim;
  auto linear = [&](const std::string& prefix, std::size_t rows, std::size_t cols) {
    AddParam(prefix + ".weight", {rows, cols}, double(rows), double(cols));
    AddParam(prefix + ".bias", {cols}, 0, 0);
  };
  auto norm = [&](const std::string& prefix) {
    AddParam(prefix + ".gain", {d}, 0, 0, 1.0);
    AddParam(prefix + ".bias", {d}, 0, 0);
  };
  auto lstm = [&](const std::string& prefix) {
    AddParam(prefix + ".w_ih", {d, 4 * d}, double(d), double(4 * d));
    AddParam(prefix + ".w_hh", {d, 4 * d}, double(d), double(4 * d));
    Tensor b = AddParam(prefix + ".bias", {4 * d}, 0, 0);
    auto bd = b.mutable_data();
    std::fill(bd.begin() + d, bd.begin() + 2 * d, 1.0);  // forget gate
  };

  linear("input", in, d);
  norm("input_norm");
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    norm(p + ".norm1");
    linear(p + ".attn.q", d, d);
    linear(p + ".attn.k", d, d);
    linear(p + ".attn.v", d, d);
    linear(p + ".attn.out", d, d);
    norm(p + ".norm2");
    linear(p + ".ff1", d, ff);
    linear(p + ".ff2", ff, d);
  }
  norm("output_norm");
  lstm("eda_enc");
  lstm("eda_dec");
  if (config_.use_attention_eda) {
    AddParam("att.w_h", {d, d}, double(d), double(d));
    AddParam("att.w_a", {d, d}, double(d), double(d));
    AddParam("att.w_c", {d, d}, double(d), double(d));
    AddParam("att.bias", {d}, 0, 0);
    AddParam("att.v", {d, 1}, double(d), 1.0);
  }
  linear("exist", d, 1);
  if (config_.use_speaker_head) linear("spk", d, std::size_t(config_.n_corpus_speakers) + 1);
}

const Tensor& EendModel::param(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ContractError("model has no parameter '" + std::string(name) + "'");
}

Tensor EendModel::Linear(const Tensor& x, const std::string& prefix) const {
  return AddRowBias(MatMul(x, param(prefix + ".weight")), param(prefix + ".bias"));
}

Tensor EendModel::Norm(const Tensor& x, const std::string& prefix) const {
  return LayerNorm(x, param(prefix + ".gain"), param(prefix + ".bias"));
}

Tensor EendModel::SelfAttention(const Tensor& x, int layer, RunContext& ctx) const {
  const std::string p = "layer" + std::to_string(layer) + ".attn";
  const Tensor q = Linear(x, p + ".q");
  const Tensor k = Linear(x, p + ".k");
  const Tensor v = Linear(x, p + ".v");
  const std::size_t heads = config_.n_heads, dk = config_.dim / config_.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = Slice(q, 1, h * dk, (h + 1) * dk);
    const Tensor kh = Slice(k, 1, h * dk, (h + 1) * dk);
    const Tensor vh = Slice(v, 1, h * dk, (h + 1) * dk);
    Tensor att = Softmax(Scale(MatMulNT(qh, kh), scale), 1);
    att = Dropout(att, config_.dropout, ctx.NextDropout());
    outs.push_back(MatMul(att, vh));
  }
  return Linear(heads == 1 ? outs[0] : Concat(outs, 1), p + ".out");
}

Tensor EendModel::FeedForward(const Tensor& x, int layer, RunContext& ctx) const {
  const std::string p = "layer" + std::to_string(layer);
  Tensor h = Relu(Linear(x, p + ".ff1"));
  h = Dropout(h, config_.dropout, ctx.NextDropout());
  return Linear(h, p + ".ff2");
}

Tensor EendModel::EncodeFrames(const Tensor& features, RunContext& ctx) const {
  if (features.rank() != 2 || features.cols() != std::size_t(config_.input_dim)) {
    throw ConfigError("feature width " + ShapeToString(features.shape()) +
                      " does not match model input_dim " + std::to_string(config_.input_dim));
  }
  if (features.rows() == 0) throw ConfigError("feature sequence has no frames");
  Tensor x = Norm(Linear(features, "input"), "input_norm");
  if (config_.use_positional_encoding) {
    x = Add(x, MatrixToTensor(PositionalEncoding(x.rows(), config_.dim)));
  }
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    Tensor s = SelfAttention(Norm(x, p + ".norm1"), l, ctx);
    x = Add(x, Dropout(s, config_.dropout, ctx.NextDropout()));
    s = FeedForward(Norm(x, p + ".norm2"), l, ctx);
    x = Add(x, Dropout(s, config_.dropout, ctx.NextDropout()));
  }
  return Norm(x, "output_norm");
}

std::pair<Tensor, Tensor> EendModel::LstmStep(const Tensor& input_proj, const Tensor& h,
                                              const Tensor& c, const std::string& prefix) const {
  const std::size_t d = config_.dim;
  const Tensor gates = Add(input_proj, MatMul(h, param(prefix + ".w_hh")));
  const Tensor i = Sigmoid(Slice(gates, 1, 0, d));
  const Tensor f = Sigmoid(Slice(gates, 1, d, 2 * d));
  const Tensor g = Tanh(Slice(gates, 1, 2 * d, 3 * d));
  const Tensor o = Sigmoid(Slice(gates, 1, 3 * d, 4 * d));
  const Tensor c_next = Add(Mul(f, c), Mul(i, g));
  const Tensor h_next = Mul(o, Tanh(c_next));
  return {h_next, c_next};
}

EdaEncoderStates EendModel::EdaEncode(const Tensor& embeddings, std::uint64_t shuffle_seed) const {
  const std::size_t t_len = embeddings.rows();
  if (t_len == 0) throw ContractError("eda encoder needs at least one frame");
  EdaEncoderStates out;
  Tensor input = embeddings;
  if (config_.use_attention_eda) {
    out.order.resize(t_len);
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  } else {
    out.order = ShuffledOrder(t_len, shuffle_seed);
    input = EmbeddingLookup(embeddings, out.order);
  }
  const Tensor proj = AddRowBias(MatMul(input, param("eda_enc.w_ih")), param("eda_enc.bias"));
  Tensor h = Tensor::Zeros({1, std::size_t(config_.dim)});
  Tensor c = h;
  std::vector<Tensor> hidden;
  hidden.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::tie(h, c) = LstmStep(Slice(proj, 0, t, t + 1), h, c, "eda_enc");
    hidden.push_back(h);
  }
  out.hidden = t_len == 1 ? hidden[0] : Concat(hidden, 0);
  out.final_h = h;
  out.final_c = c;
  return out;
}

AttentionOutput EendModel::AttentionContext(const Tensor& a_prev, const Tensor& c_prev,
                                            const Tensor& encoder_hidden) const {
  if (!config_.use_attention_eda) throw ContractError("attention context needs attention EDA");
  const Tensor hw = MatMul(encoder_hidden, param("att.w_h"));
  const Tensor query = AddRowBias(
      Add(MatMul(a_prev, param("att.w_a")), MatMul(c_prev, param("att.w_c"))), param("att.bias"));
  const Tensor scores = Transpose(MatMul(Tanh(AddRowBias(hw, query)), param("att.v")));
  const Tensor w = Softmax(scores, 1);
  return {MatMul(w, encoder_hidden), w};
}

DecodedAttractors EendModel::EdaDecode(const EdaEncoderStates& states, std::size_t count) const {
  if (count == 0) throw ContractError("eda decode needs at least one step");
  const std::size_t d = config_.dim;
  const Tensor& w_ih = param("eda_dec.w_ih");
  const Tensor& bias = param("eda_dec.bias");
  Tensor h = states.final_h, c = states.final_c;
  std::vector<Tensor> attractors, contexts, weights;
  for (std::size_t s = 0; s < count; ++s) {
    Tensor proj;
    if (config_.use_attention_eda) {
      AttentionOutput att = AttentionContext(h, c, states.hidden);
      proj = AddRowBias(MatMul(att.context, w_ih), bias);
      contexts.push_back(att.context);
      weights.push_back(att.weights);
    } else {
      // Zero input: the projection reduces to the bias.
      proj = AddRowBias(Tensor::Zeros({1, 4 * d}), bias);
    }
    std::tie(h, c) = LstmStep(proj, h, c, "eda_dec");
    attractors.push_back(h);
  }
  DecodedAttractors out;
  auto stack = [](const std::vector<Tensor>& rows) {
    return rows.size() == 1 ? rows[0] : Concat(rows, 0);
  };
  out.attractors = stack(attractors);
  if (!contexts.empty()) {
    out.context = stack(contexts);
    out.attention = stack(weights);
  }
  return out;
}

Tensor EendModel::ActivityProbs(const Tensor& embeddings, const Tensor& attractors) const {
  return Sigmoid(MatMulNT(embeddings, attractors));
}

Tensor EendModel::ExistenceProbs(const Tensor& attractors) const {
  return Sigmoid(Linear(attractors, "exist"));
}

Tensor EendModel::SpeakerPosteriors(const Tensor& attractors) const {
  if (!config_.use_speaker_head) throw ContractError("model has no speaker head");
  return Softmax(Linear(attractors, "spk"), 1);
}

AttractorSet EendModel::ToAttractorSet(const DecodedAttractors& decoded) const {
  AttractorSet set;
  set.a = TensorToMatrix(decoded.attractors);
  const Tensor exist = ExistenceProbs(decoded.attractors);
  set.existence_probs.assign(exist.data().begin(), exist.data().end());
  if (config_.use_speaker_head) set.speaker_posteriors = TensorToMatrix(SpeakerPosteriors(decoded.attractors));
  if (decoded.context.defined()) {
    set.context_vectors = TensorToMatrix(decoded.context);
    set.attention_weights = TensorToMatrix(decoded.attention);
  }
  return set;
}

InferenceResult EendModel::Infer(const Matrix& features, std::optional<std::size_t> oracle_speakers,
                                 std::uint64_t shuffle_seed) const {
  RunContext ctx;
  const Tensor e = EncodeFrames(MatrixToTensor(features), ctx);
  const EdaEncoderStates states = EdaEncode(e, shuffle_seed);
  const std::size_t cap = std::size_t(config_.max_decode_speakers);
  std::size_t steps = oracle_speakers ? *oracle_speakers : cap + 1;
  if (oracle_speakers && (*oracle_speakers == 0 || *oracle_speakers > cap)) {
    throw ContractError("oracle speaker count must be in [1, max_decode_speakers]");
  }
  const DecodedAttractors decoded = EdaDecode(states, steps);
  AttractorSet all = ToAttractorSet(decoded);

  std::size_t keep = steps;
  if (!oracle_speakers) {
    keep = cap;
    for (std::size_t s = 0; s < steps; ++s) {
      const bool stop = config_.use_speaker_head
                            ? all.speaker_posteriors(s, 0) > config_.stop_class_threshold
                            : all.existence_probs[s] < config_.existence_threshold;
      if (stop) {
        keep = std::min(s, cap);
        break;
      }
    }
  }

  auto head_rows = [keep](const Matrix& m) {
    if (m.rows() == 0) return m;
    Matrix out(keep, m.cols());
    std::copy_n(m.data().begin(), keep * m.cols(), out.data().begin());
    return out;
  };
  InferenceResult result;
  result.embeddings = TensorToMatrix(e);
  result.attractors.a = head_rows(all.a);
  result.attractors.existence_probs.assign(all.existence_probs.begin(),
                                           all.existence_probs.begin() + keep);
  result.attractors.speaker_posteriors = head_rows(all.speaker_posteriors);
  result.attractors.context_vectors = head_rows(all.context_vectors);
  result.attractors.attention_weights = head_rows(all.attention_weights);
  if (keep == 0) {
    result.activity = Matrix(e.rows(), 0);
  } else {
    result.activity = TensorToMatrix(ActivityProbs(e, MatrixToTensor(result.attractors.a)));
  }
  return result;
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'V', 'D', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void Put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T Get(const char* what) {
    T value;
    std::memcpy(&value, Take(sizeof(T), what).data(), sizeof(T));
    return value;
  }

  std::string_view Take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw LoadError(std::string("checkpoint truncated while reading ") + what);
    }
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SerializeModel(const EendModel& model, const std::string& metadata_json) {
  json header;
  header["config"] = json::parse(model.config().ToJson());
  header["metadata"] = json::parse(metadata_json);
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kCheckpointVersion);
  Put<std::uint64_t>(out, text.size());
  out += text;
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) Put<std::uint64_t>(out, d);
    for (double v : p.value.data()) Put<double>(out, v);
  }
  return out;
}

void SaveModel(const EendModel& model, const std::string& path, const std::string& metadata_json) {
  const std::string bytes = SerializeModel(model, metadata_json);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

LoadedModel DeserializeModel(std::string_view bytes) {
  Reader in(bytes);
  if (in.Take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) {
    throw LoadError("not a checkpoint (bad magic)");
  }
  const auto version = in.Get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto json_len = in.Get<std::uint64_t>("header length");
  const std::string_view text = in.Take(json_len, "header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint header: ") + e.what());
  }
  ModelConfig config;
  try {
    config = ModelConfig::FromJson(header.at("config").dump());
  } catch (const std::exception& e) {
    throw LoadError(std::string("checkpoint config: ") + e.what());
  }
  EendModel model(config, 0);
  const auto count = in.Get<std::uint32_t>("tensor count");
  if (count != model.parameters().size()) {
    throw LoadError("checkpoint has " + std::to_string(count) + " tensors, config expects " +
                    std::to_string(model.parameters().size()));
  }
  for (auto& p : model.parameters()) {
    const auto name_len = in.Get<std::uint32_t>("tensor name length");
    const std::string_view name = in.Take(name_len, "tensor name");
    if (name != p.name) {
      throw LoadError("checkpoint tensor '" + std::string(name) + "' where '" + p.name + "' expected");
    }
    const auto rank = in.Get<std::uint32_t>("tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = in.Get<std::uint64_t>("tensor dims");
    if (shape != p.value.shape()) {
      throw LoadError("checkpoint tensor '" + p.name + "' has shape " + ShapeToString(shape) +
                      ", config expects " + ShapeToString(p.value.shape()));
    }
    auto data = p.value.mutable_data();
    const std::string_view raw = in.Take(data.size() * sizeof(double), "tensor data");
    std::memcpy(data.data(), raw.data(), raw.size());
  }
  if (!in.done()) throw LoadError("checkpoint has trailing bytes");
  return {std::move(model), header.value("metadata", json::object()).dump()};
}

LoadedModel LoadModel(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return DeserializeModel(bytes);
}

}  // namespace avdiar
