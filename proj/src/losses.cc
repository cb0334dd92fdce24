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

#include "avdiar/losses.h"

#include <cmath>
#include <string>

#include "avdiar/assignment.h"
#include "avdiar/error.h"

namespace avdiar {
namespace {

Matrix ToMatrix(const Tensor& t) {
  return Matrix(t.rows(), t.cols(), std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor ClampProbabilities(const Tensor& p) {
  for (double v : p.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractError("probability " + std::to_string(v) + " outside [0, 1]");
    }
  }
  return Clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

Tensor SelectedSum(const Tensor& cost, const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> flat(perm.size());
  for (std::size_t s = 0; s < perm.size(); ++s) flat[s] = s * cost.cols() + perm[s];
  return Sum(Gather(cost, flat));
}

}  // namespace

double LossWeights::beta() const { return beta0 * std::pow(beta_decay, epoch); }

AssignmentResult AssignPermutation(const Matrix& cost, PitMode mode,
                                   const SinkhornOptions& sinkhorn) {
  AssignmentResult result;
  result.cost = cost;
  if (mode == PitMode::kExhaustive) {
    result.permutation = ExhaustiveAssignment(cost).row_to_col;
    return result;
  }
  Matrix log_p = SinkhornLog(cost, sinkhorn.temperature, sinkhorn.iterations);
  Matrix neg_log(log_p.rows(), log_p.cols());
  result.soft_matrix = Matrix(log_p.rows(), log_p.cols());
  for (std::size_t i = 0; i < log_p.data().size(); ++i) {
    neg_log.data()[i] = -log_p.data()[i];
    result.soft_matrix.data()[i] = std::exp(log_p.data()[i]);
  }
  result.permutation = SolveAssignment(neg_log).row_to_col;
  return result;
}

AssignmentResult DiaBcePit(const Tensor& y_hat, const Matrix& y_true, double gamma,
                           PitMode mode, const SinkhornOptions& sinkhorn, bool average) {
  const std::size_t frames = y_hat.rows(), speakers = y_hat.cols();
  if (y_true.rows() != frames || y_true.cols() != speakers) {
    throw DimensionError("dia_bce_pit: estimate " + ShapeToString(y_hat.shape()) +
                         " vs labels [" + std::to_string(y_true.rows()) + ", " +
                         std::to_string(y_true.cols()) + "]");
  }
  Tensor p = ClampProbabilities(y_hat);
  Tensor log_p = Log(p);
  Tensor log_not_p = Log(AddScalar(Scale(p, -1.0), 1.0));
  std::vector<double> pos(y_true.data()), neg(y_true.data().size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    neg[i] = 1.0 - pos[i];
    pos[i] *= gamma;
  }
  Tensor pos_t = Tensor::FromData({frames, speakers}, std::move(pos));
  Tensor neg_t = Tensor::FromData({frames, speakers}, std::move(neg));
  // cost(s, s') = −Σ_t [γ y_{t,s'} log p_{t,s} + (1 − y_{t,s'}) log(1 − p_{t,s})]
  Tensor cost = Scale(Add(MatMul(Transpose(log_p), pos_t), MatMul(Transpose(log_not_p), neg_t)),
                      -1.0);
  AssignmentResult result = AssignPermutation(ToMatrix(cost), mode, sinkhorn);
  result.loss = SelectedSum(cost, result.permutation);
  if (average) result.loss = Scale(result.loss, 1.0 / static_cast<double>(frames * speakers));
  return result;
}

AssignmentResult SpeakerCePit(const Tensor& posteriors, std::span<const std::size_t> labels,
                              PitMode mode, const SinkhornOptions& sinkhorn) {
  const std::size_t speakers = labels.size();
  const std::size_t classes = posteriors.cols();
  if (speakers == 0 || posteriors.rows() < speakers) {
    throw DimensionError("speaker_ce_pit: " + std::to_string(speakers) +
                         " labels for posteriors " + ShapeToString(posteriors.shape()));
  }
  for (std::size_t label : labels) {
    if (label < 1 || label >= classes) {
      throw ContractError("speaker label " + std::to_string(label) + " outside [1, " +
                          std::to_string(classes - 1) + "]");
    }
  }
  Tensor head = Slice(posteriors, 0, 0, speakers);
  Tensor neg_log = Scale(Log(ClampProbabilities(head)), -1.0);
  std::vector<std::size_t> flat(speakers * speakers);
  for (std::size_t s = 0; s < speakers; ++s)
    for (std::size_t t = 0; t < speakers; ++t) flat[s * speakers + t] = s * classes + labels[t];
  Tensor gathered = Gather(neg_log, flat);
  Matrix cost(speakers, speakers,
              std::vector<double>(gathered.data().begin(), gathered.data().end()));
  AssignmentResult result = AssignPermutation(cost, mode, sinkhorn);
  std::vector<std::size_t> chosen(speakers);
  for (std::size_t s = 0; s < speakers; ++s) chosen[s] = s * speakers + result.permutation[s];
  result.loss = Sum(Gather(gathered, chosen));
  return result;
}

Tensor StopCe(const Tensor& posterior_row) {
  double total = 0.0;
  for (double v : posterior_row.data()) total += v;
  if (std::abs(total - 1.0) > 1e-6) {
    throw ContractError("stop_ce: posterior row sums to " + std::to_string(total));
  }
  const std::size_t zero = 0;
  return Scale(Sum(Log(ClampProbabilities(Gather(posterior_row, {&zero, 1})))), -1.0);
}

Tensor ExistenceBce(const Tensor& existence_probs) {
  const std::size_t n = existence_probs.size();
  std::vector<double> target(n, 1.0);
  target.back() = 0.0;
  Tensor p = ClampProbabilities(existence_probs);
  std::vector<double> not_target(n);
  for (std::size_t i = 0; i < n; ++i) not_target[i] = 1.0 - target[i];
  Tensor y = Tensor::FromData(existence_probs.shape(), target);
  Tensor ny = Tensor::FromData(existence_probs.shape(), not_target);
  Tensor ll = Add(Mul(y, Log(p)), Mul(ny, Log(AddScalar(Scale(p, -1.0), 1.0))));
  return Scale(Sum(ll), -1.0 / static_cast<double>(n));
}

Tensor TotalLoss(const Tensor& dia, const Tensor& spk, const Tensor& stop,
                 const LossWeights& weights, bool use_speaker_head) {
  if (!use_speaker_head) return dia;
  return Add(dia, Scale(Add(spk, Scale(stop, weights.alpha)), weights.beta()));
}

double TotalLoss(double dia, double spk, double stop, const LossWeights& weights,
                 bool use_speaker_head) {
  if (!use_speaker_head) return dia;
  return dia + weights.beta() * (spk + weights.alpha * stop);
}

}  // namespace avdiar
