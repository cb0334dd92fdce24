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

// Training objectives: permutation-invariant diarization BCE, speaker
// classification cross-entropy over attractors, the "not a speaker" stop
// loss, the existence BCE of the vanilla attractor decoder, and their
// weighted combination.

#include <cstddef>
#include <span>
#include <vector>

#include "avdiar/matrix.h"
#include "avdiar/tensor.h"

namespace avdiar {

inline constexpr double kProbabilityClamp = 1e-7;

enum class PitMode { kExhaustive, kSinkhorn };

struct SinkhornOptions {
  double temperature = 0.05;
  int iterations = 200;
};

struct LossWeights {
  double alpha = 0.01;
  double beta0 = 0.1;
  double beta_decay = 0.92;
  double gamma = 5.0;
  int epoch = 0;

  // beta0 * beta_decay^epoch
  double beta() const;
};

struct AssignmentResult {
  // permutation[s] = label stream matched to estimated stream s.
  std::vector<std::size_t> permutation;
  Tensor loss;
  // Row/column-normalized matrix from the Sinkhorn path; empty otherwise.
  Matrix soft_matrix;
  // Pairwise costs, cost(s, s') for estimate s against label s'.
  Matrix cost;
};

// Pairwise cost Σ_t −[γ y log ŷ + (1 − y) log(1 − ŷ)] between each
// estimated column of `y_hat` (T x S) and each label column of `y_true`
// (T x S, binary), minimized over permutations. Probabilities are clamped
// to [1e-7, 1 − 1e-7] first; values outside [0, 1] raise ContractError.
// With `average` the loss is divided by T * S.
AssignmentResult DiaBcePit(const Tensor& y_hat, const Matrix& y_true, double gamma,
                           PitMode mode, const SinkhornOptions& sinkhorn = {},
                           bool average = false);

// cost(s, s') = −log p̂_s(label_{s'}) over the first S posterior rows.
// Labels are corpus classes in [1, J]; class 0 is "not a speaker".
AssignmentResult SpeakerCePit(const Tensor& posteriors, std::span<const std::size_t> labels,
                              PitMode mode, const SinkhornOptions& sinkhorn = {});

// −log p̂(0) for one posterior row (1 x (J+1)).
Tensor StopCe(const Tensor& posterior_row);

// Mean BCE of the existence probabilities (n x 1) against n−1 ones followed
// by a single zero.
Tensor ExistenceBce(const Tensor& existence_probs);

// dia + β(epoch) · (spk + α · stop); with the speaker path disabled the
// result is `dia` alone.
Tensor TotalLoss(const Tensor& dia, const Tensor& spk, const Tensor& stop,
                 const LossWeights& weights, bool use_speaker_head);
double TotalLoss(double dia, double spk, double stop, const LossWeights& weights,
                 bool use_speaker_head);

// Hard assignment for a cost matrix in the requested mode. The Sinkhorn
// path rounds its soft matrix by exact assignment on −log entries.
AssignmentResult AssignPermutation(const Matrix& cost, PitMode mode,
                                   const SinkhornOptions& sinkhorn);

}  // namespace avdiar
