#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "utopic/matching/correspondence.hpp"

namespace utopic::matching {

/// Minimum-cost perfect assignment of a square cost matrix (row-major, n x n)
/// by shortest augmenting paths with dual potentials. Returns col_of_row.
inline std::vector<std::size_t> solve_square_assignment(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw DimensionError("solve_square_assignment: cost must be n x n");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual root of each augmentation.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

/// Total of c over the entries selected by `hard` (slack entries included).
inline double assignment_objective(const SlackCorrespondenceMatrix& soft, const SlackCorrespondenceMatrix& hard) {
  double s = 0.0;
  for (std::size_t k = 0; k < soft.values.size(); ++k) s += soft.values[k] * hard.values[k];
  return s;
}

/// Exact hard correspondence maximising the selected soft mass. Rows and
/// columns may stay unmatched, in which case their slack entry is taken.
/// Solved as an (N+M) square problem: real x real scores c(i, j), a real row
/// against any dummy column scores its slack c(i, M), a dummy row against a
/// real column scores c(N, j), dummy x dummy scores 0.
inline SlackCorrespondenceMatrix lap_solve(const SlackCorrespondenceMatrix& c) {
  if (!c.values.all_finite()) throw ContractError("lap_solve: non-finite scores");
  const std::size_t n = c.n(), m = c.m(), s = n + m;
  auto out = SlackCorrespondenceMatrix::zeros(n, m);
  if (s == 0) return out;
  std::vector<double> cost(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      double profit = 0.0;
      if (i < n && j < m) profit = c(i, j);
      else if (i < n) profit = c(i, m);
      else if (j < m) profit = c(n, j);
      cost[i * s + j] = -profit;
    }
  const auto col_of_row = solve_square_assignment(cost, s);
  std::vector<bool> col_used(m, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = col_of_row[i];
    if (j < m) {
      out(i, j) = 1.0;
      col_used[j] = true;
    } else {
      out(i, m) = 1.0;
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!col_used[j]) out(n, j) = 1.0;
  return out;
}

}  // namespace utopic::matching
