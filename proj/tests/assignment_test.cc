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
#include <numeric>
#include <random>

#include "avdiar/assignment.h"
#include "avdiar/error.h"
#include "doctest.h"

namespace avdiar {
namespace {

Matrix RandomMatrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = 0.0,
                    double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

// Brute force over all injections of the smaller side into the larger.
double BruteForceOptimum(const Matrix& cost) {
  const bool wide = cost.rows() <= cost.cols();
  const std::size_t small = wide ? cost.rows() : cost.cols();
  const std::size_t large = wide ? cost.cols() : cost.rows();
  std::vector<std::size_t> pool(large);
  std::iota(pool.begin(), pool.end(), 0);
  double best = INFINITY;
  // Enumerate permutations of the large side; the first `small` entries form
  // the injection.
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < small; ++i) total += wide ? cost(i, pool[i]) : cost(pool[i], i);
    best = std::min(best, total);
  } while (std::next_permutation(pool.begin(), pool.end()));
  return best;
}

TEST_CASE("exact assignment matches brute force") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t r = 1 + trial % 5;
    const std::size_t c = 1 + (trial / 5) % 5;
    Matrix cost = RandomMatrix(r, c, rng, -3.0, 5.0);
    Assignment a = SolveAssignment(cost);
    CHECK(a.cost == doctest::Approx(BruteForceOptimum(cost)).epsilon(1e-12));
    std::vector<std::size_t> used;
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      if (a.row_to_col[i] == kUnassigned) continue;
      used.push_back(a.row_to_col[i]);
      total += cost(i, a.row_to_col[i]);
    }
    CHECK(used.size() == std::min(r, c));
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
    CHECK(total == doctest::Approx(a.cost));
  }
}

TEST_CASE("ties resolve to the lexicographically smallest assignment") {
  Matrix flat(4, 4, 2.5);
  CHECK(SolveAssignment(flat).row_to_col == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(ExhaustiveAssignment(flat).row_to_col == std::vector<std::size_t>{0, 1, 2, 3});
  // Rows 0 and 1 are interchangeable; row 0 must take column 0.
  Matrix m(3, 3, std::vector<double>{1, 1, 9, 1, 1, 9, 9, 9, 0});
  CHECK(SolveAssignment(m).row_to_col == std::vector<std::size_t>{0, 1, 2});
  Matrix tall(3, 1, std::vector<double>{4, 1, 1});
  CHECK(SolveAssignment(tall).row_to_col == std::vector<std::size_t>{kUnassigned, 0, kUnassigned});
}

TEST_CASE("sinkhorn") {
  SUBCASE("zero cost gives the uniform matrix") {
    Matrix p = Sinkhorn(Matrix(4, 4, 0.0), 0.05, 200);
    for (double v : p.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("dominant diagonal converges to identity") {
    Matrix cost(5, 5, 10.0);
    for (std::size_t i = 0; i < 5; ++i) cost(i, i) = 0.0;
    Matrix p = Sinkhorn(cost, 0.05, 200);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(p(i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
  }
  SUBCASE("rounded assignment matches the exact optimum at temperature 0.05") {
    std::mt19937_64 rng(7);
    int matches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Matrix cost = RandomMatrix(4, 4, rng);
      Matrix p = Sinkhorn(cost, 0.05, 200);
      for (std::size_t i = 0; i < 4; ++i) {
        double rs = 0, cs = 0;
        for (std::size_t j = 0; j < 4; ++j) {
          rs += p(i, j);
          cs += p(j, i);
        }
        CHECK(std::abs(cs - 1.0) < 1e-6);
        CHECK(std::abs(rs - 1.0) < 1e-6);
      }
      // Round by exact assignment on -log P.
      Matrix neg_log = p;
      for (double& v : neg_log.data()) v = -std::log(std::max(v, 1e-300));
      std::vector<std::size_t> hard = SolveAssignment(neg_log).row_to_col;
      double hard_cost = 0.0;
      for (std::size_t i = 0; i < 4; ++i) hard_cost += cost(i, hard[i]);
      if (std::abs(hard_cost - BruteForceOptimum(cost)) < 1e-12) ++matches;
    }
    CHECK(matches >= 95);
  }
  CHECK_THROWS_AS(Sinkhorn(Matrix(2, 2, 0.0), 0.0, 10), ContractError);
}

}  // namespace
}  // namespace avdiar
