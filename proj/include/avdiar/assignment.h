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

// Exact and relaxed assignment between two index sets.

#include <cstddef>
#include <limits>
#include <vector>

#include "avdiar/matrix.h"

namespace avdiar {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

struct Assignment {
  // row_to_col[r] is the column matched to row r, or kUnassigned when there
  // are more rows than columns.
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

// Minimum-cost one-to-one assignment of a rectangular cost matrix; min(R, C)
// pairs are formed. Among optimal assignments (within a relative tolerance of
// 1e-12) the lexicographically smallest row_to_col is returned, so row 0
// takes the lowest column it can, then row 1, and so on.
Assignment SolveAssignment(const Matrix& cost);

// Enumerates all permutations of a square cost matrix; the first minimum in
// lexicographic order wins. Factorial cost: intended for S <= 8.
Assignment ExhaustiveAssignment(const Matrix& cost);

// Alternating row/column normalization of exp(-cost / temperature) carried
// out in the log domain. Returns the log of the doubly-stochastic matrix;
// the last sweep normalizes columns. The temperature is annealed down from
// the cost range before the `iterations` sweeps at the target. Plain sweeps
// converge slowly at low temperature, so square problems then continue with
// damped Newton steps on the scaling potentials until every row sum is
// within `tolerance` of 1 or `max_iterations` is reached.
Matrix SinkhornLog(const Matrix& cost, double temperature, int iterations,
                   double tolerance = 1e-9, int max_iterations = 200000);

// exp of SinkhornLog.
Matrix Sinkhorn(const Matrix& cost, double temperature, int iterations,
                double tolerance = 1e-9, int max_iterations = 200000);

}  // namespace avdiar
