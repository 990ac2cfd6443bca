#pragma once

#include <utility>
#include <vector>

#include "utopic/diffmath/tensor.hpp"

namespace utopic::matching {

/// (N+1) x (M+1) nonnegative matrix. Row N and column M are the slack row
/// and column that absorb points without a counterpart.
struct SlackCorrespondenceMatrix {
  diffmath::Tensor values;

  SlackCorrespondenceMatrix() = default;
  explicit SlackCorrespondenceMatrix(diffmath::Tensor v) : values(std::move(v)) {
    if (values.rows() < 1 || values.cols() < 1) throw DimensionError("correspondence matrix needs a slack row and column");
  }

  static SlackCorrespondenceMatrix zeros(std::size_t n, std::size_t m) {
    return SlackCorrespondenceMatrix(diffmath::Tensor(n + 1, m + 1));
  }

  std::size_t n() const { return values.rows() - 1; }
  std::size_t m() const { return values.cols() - 1; }
  std::size_t slack_row() const { return n(); }
  std::size_t slack_col() const { return m(); }

  double& operator()(std::size_t i, std::size_t j) { return values(i, j); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }

  double row_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < m(); ++j) s += values(i, j);
    return s;
  }
  double col_sum(std::size_t j) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n(); ++i) s += values(i, j);
    return s;
  }

  /// Non-slack N x M block.
  diffmath::Tensor block() const {
    diffmath::Tensor b(n(), m());
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < m(); ++j) b(i, j) = values(i, j);
    return b;
  }

  /// Binary, with at most one non-slack 1 per row and per column.
  bool is_hard() const {
    for (double v : values.values())
      if (v != 0.0 && v != 1.0) return false;
    for (std::size_t i = 0; i < n(); ++i)
      if (row_sum(i) > 1.0) return false;
    for (std::size_t j = 0; j < m(); ++j)
      if (col_sum(j) > 1.0) return false;
    return true;
  }

  /// Non-slack (i, j) with value 1, in row-major order.
  std::vector<std::pair<std::size_t, std::size_t>> matches() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < m(); ++j)
        if (values(i, j) == 1.0) out.emplace_back(i, j);
    return out;
  }
};

}  // namespace utopic::matching
