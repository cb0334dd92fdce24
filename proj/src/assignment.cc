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

#include "avdiar/assignment.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "avdiar/error.h"

namespace avdiar {
namespace {

// Hungarian algorithm with potentials for n <= m. Returns the column of each
// row and the optimal cost.
std::pair<std::vector<std::size_t>, double> Hungarian(const Matrix& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, kUnassigned);
  double total = 0.0;
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) {
      row_to_col[p[j] - 1] = j - 1;
      total += a(p[j] - 1, j - 1);
    }
  }
  return {row_to_col, total};
}

// Sub-matrix over the given rows and columns.
Matrix Select(const Matrix& a, const std::vector<std::size_t>& rows,
              const std::vector<std::size_t>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = a(rows[i], cols[j]);
  return out;
}

double SubOptimum(const Matrix& a, const std::vector<std::size_t>& rows,
                  const std::vector<std::size_t>& cols) {
  if (rows.empty()) return 0.0;
  return Hungarian(Select(a, rows, cols)).second;
}

// Square-or-wide case (rows <= cols) with lexicographic tie-breaking.
Assignment SolveWide(const Matrix& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const double optimum = Hungarian(a).second;
  const double tol = 1e-12 * std::max(1.0, std::abs(optimum));
  Assignment result;
  result.row_to_col.assign(n, kUnassigned);
  std::vector<std::size_t> free_cols(m);
  std::iota(free_cols.begin(), free_cols.end(), 0);
  double fixed = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> rest_rows;
    for (std::size_t r = i + 1; r < n; ++r) rest_rows.push_back(r);
    for (std::size_t k = 0; k < free_cols.size(); ++k) {
      const std::size_t j = free_cols[k];
      std::vector<std::size_t> rest_cols = free_cols;
      rest_cols.erase(rest_cols.begin() + static_cast<long>(k));
      const double total = fixed + a(i, j) + SubOptimum(a, rest_rows, rest_cols);
      if (total <= optimum + tol) {
        result.row_to_col[i] = j;
        fixed += a(i, j);
        free_cols = std::move(rest_cols);
        break;
      }
    }
  }
  result.cost = fixed;
  return result;
}

// Largest violation of the row and column marginals of the plan defined by
// the potentials.
double MarginalError(const Matrix& cost, double tau, const std::vector<double>& f,
                     const std::vector<double>& g) {
  const std::size_t n = cost.rows();
  std::vector<double> col(n, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = std::exp((f[i] + g[j] - cost(i, j)) / tau);
      row += p;
      col[j] += p;
    }
    worst = std::max(worst, std::abs(row - 1.0));
  }
  for (double v : col) worst = std::max(worst, std::abs(v - 1.0));
  return worst;
}

// One Newton step on the square scaling equations. The row update is
// eliminated, leaving a Laplacian-like system in the column potentials whose
// gauge is pinned by fixing the last one. A ridge proportional to the current
// error keeps numerically disconnected blocks still. Steps are halved until the
// marginal error decreases; a step that never helps is discarded.
void NewtonStep(const Matrix& cost, double tau, std::vector<double>& f, std::vector<double>& g) {
  const std::size_t n = cost.rows();
  if (n < 2) return;
  Matrix p(n, n);
  std::vector<double> row(n, 0.0), col(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / tau);
      row[i] += p(i, j);
      col[j] += p(i, j);
    }
  }
  const double before = MarginalError(cost, tau, f, g);
  const std::size_t m = n - 1;
  Matrix a(m, m + 1, 0.0);  // augmented [L | rhs]
  for (std::size_t j = 0; j < m; ++j) {
    double rhs = 1.0 - col[j];
    for (std::size_t i = 0; i < n; ++i) rhs -= p(i, j) * (1.0 - row[i]) / row[i];
    a(j, m) = rhs;
    for (std::size_t k = 0; k < m; ++k) {
      double s = (j == k) ? col[j] + before : 0.0;
      for (std::size_t i = 0; i < n; ++i) s -= p(i, j) * p(i, k) / row[i];
      a(j, k) = s;
    }
  }
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < m; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (a(piv, k) == 0.0) return;
    if (piv != k)
      for (std::size_t j = k; j <= m; ++j) std::swap(a(k, j), a(piv, j));
    for (std::size_t i = k + 1; i < m; ++i) {
      const double factor = a(i, k) / a(k, k);
      for (std::size_t j = k; j <= m; ++j) a(i, j) -= factor * a(k, j);
    }
  }
  std::vector<double> dv(n, 0.0), du(n, 0.0);
  for (std::size_t k = m; k-- > 0;) {
    double s = a(k, m);
    for (std::size_t j = k + 1; j < m; ++j) s -= a(k, j) * dv[j];
    dv[k] = s / a(k, k);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0 - row[i];
    for (std::size_t j = 0; j < n; ++j) s -= p(i, j) * dv[j];
    du[i] = s / row[i];
  }
  std::vector<double> nf(n), ng(n);
  for (double step = 1.0; step > 1e-6; step *= 0.5) {
    for (std::size_t i = 0; i < n; ++i) {
      nf[i] = f[i] + step * tau * du[i];
      ng[i] = g[i] + step * tau * dv[i];
    }
    const double after = MarginalError(cost, tau, nf, ng);
    if (std::isfinite(after) && after < before) {
      f.swap(nf);
      g.swap(ng);
      return;
    }
  }
}

}  // namespace

Assignment SolveAssignment(const Matrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) {
    return Assignment{std::vector<std::size_t>(cost.rows(), kUnassigned), 0.0};
  }
  for (double v : cost.data()) {
    if (!std::isfinite(v)) throw ContractError("assignment cost contains a non-finite entry");
  }
  if (cost.rows() <= cost.cols()) return SolveWide(cost);
  // Tall: solve the transpose, then invert the mapping.
  Matrix t(cost.cols(), cost.rows());
  for (std::size_t i = 0; i < cost.rows(); ++i)
    for (std::size_t j = 0; j < cost.cols(); ++j) t(j, i) = cost(i, j);
  Assignment wide = SolveWide(t);
  Assignment result;
  result.row_to_col.assign(cost.rows(), kUnassigned);
  for (std::size_t j = 0; j < wide.row_to_col.size(); ++j) result.row_to_col[wide.row_to_col[j]] = j;
  result.cost = wide.cost;
  return result;
}

Assignment ExhaustiveAssignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw DimensionError("exhaustive assignment needs a square matrix, got " +
                         std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()));
  }
  const std::size_t n = cost.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best{perm, std::numeric_limits<double>::infinity()};
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    if (total < best.cost) best = Assignment{perm, total};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Matrix SinkhornLog(const Matrix& cost, double temperature, int iterations,
                   double tolerance, int max_iterations) {
  if (!(temperature > 0)) throw ContractError("sinkhorn temperature must be positive");
  for (double v : cost.data()) {
    if (!std::isfinite(v)) throw ContractError("sinkhorn cost contains a non-finite entry");
  }
  const std::size_t r = cost.rows(), c = cost.cols();
  // Dual potentials: log P(i, j) = (f_i + g_j - cost(i, j)) / tau. A row sweep
  // sets f so every row of P sums to one, a column sweep does the same for g.
  std::vector<double> f(r, 0.0), g(c, 0.0), scratch(std::max(r, c));
  auto log_sum_exp = [](std::span<const double> values) {
    const double mx = *std::max_element(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += std::exp(v - mx);
    return mx + std::log(s);
  };
  auto sweep = [&](double tau) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) scratch[j] = (g[j] - cost(i, j)) / tau;
      f[i] = -tau * log_sum_exp({scratch.data(), c});
    }
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t i = 0; i < r; ++i) scratch[i] = (f[i] - cost(i, j)) / tau;
      g[j] = -tau * log_sum_exp({scratch.data(), r});
    }
  };
  auto rows_converged = [&] {
    for (std::size_t i = 0; i < r; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) total += std::exp((f[i] + g[j] - cost(i, j)) / temperature);
      if (std::abs(total - 1.0) > tolerance) return false;
    }
    return true;
  };
  // Anneal from the cost range down to the target temperature; the fixed
  // point at the target is unchanged, only reached from a warm start.
  const auto [lo, hi] = std::minmax_element(cost.data().begin(), cost.data().end());
  for (double tau = *hi - *lo; tau > temperature; tau *= 0.5) {
    for (int k = 0; k < 10; ++k) sweep(tau);
  }
  for (int it = 0; it < iterations; ++it) sweep(temperature);
  // Near-permutation plans make plain sweeps contract at a rate close to one,
  // so square problems finish with damped Newton steps on the potentials.
  for (int it = iterations; r == c && it < max_iterations; ++it) {
    if (rows_converged()) break;
    NewtonStep(cost, temperature, f, g);
    sweep(temperature);
  }
  Matrix log_p(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) log_p(i, j) = (f[i] + g[j] - cost(i, j)) / temperature;
  return log_p;
}

Matrix Sinkhorn(const Matrix& cost, double temperature, int iterations, double tolerance,
                int max_iterations) {
  Matrix p = SinkhornLog(cost, temperature, iterations, tolerance, max_iterations);
  for (double& v : p.data()) v = std::exp(v);
  return p;
}

}  // namespace avdiar
