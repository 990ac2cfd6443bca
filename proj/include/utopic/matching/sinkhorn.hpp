#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "utopic/diffmath/ops.hpp"
#include "utopic/matching/correspondence.hpp"

namespace utopic::matching {

using diffmath::Graph;
using diffmath::Tensor;
using diffmath::Var;

struct SinkhornOptions {
  std::size_t iters = 5;
  double slack_init = 0.0;
};

/// A(i, j) = f_i^P W (f_j^Q)^T.
inline Var affinity(const Var& fp, const Var& fq, const Var& w) {
  if (fp.cols() != fq.cols() || w.rows() != fp.cols() || w.cols() != fq.cols()) {
    throw ContractError("affinity: feature widths " + std::to_string(fp.cols()) + " / " + std::to_string(fq.cols()) +
                        " do not fit W " + w.value().shape_string());
  }
  return diffmath::matmul_nt(diffmath::matmul(fp, w), fq);
}

inline Tensor affinity(const Tensor& fp, const Tensor& fq, const Tensor& w) {
  Graph g;
  return affinity(g.constant(fp), g.constant(fq), g.constant(w)).value();
}

namespace detail {

/// In-place log-normalisation of every row except the last.
inline void normalize_rows(Tensor& l) {
  const std::size_t c = l.cols();
  for (std::size_t i = 0; i + 1 < l.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, l(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(l(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) l(i, j) -= lse;
  }
}

/// In-place log-normalisation of every column except the last.
inline void normalize_cols(Tensor& l) {
  const std::size_t r = l.rows();
  for (std::size_t j = 0; j + 1 < l.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r; ++i) mx = std::max(mx, l(i, j));
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += std::exp(l(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t i = 0; i < r; ++i) l(i, j) -= lse;
  }
}

}  // namespace detail

/// Slack-augmented log matrix before any normalisation.
inline Tensor augment_with_slack(const Tensor& a, double slack_init) {
  Tensor l(a.rows() + 1, a.cols() + 1, slack_init);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) l(i, j) = a(i, j);
  return l;
}

/// Log matrices after each half-step: trace[2k] follows the k-th row pass,
/// trace[2k+1] the k-th column pass.
inline std::vector<Tensor> sinkhorn_log_trace(const Tensor& a, const SinkhornOptions& opt) {
  if (opt.iters < 1) throw ContractError("sinkhorn: iters must be >= 1");
  if (!a.all_finite()) throw ContractError("sinkhorn: non-finite affinity");
  std::vector<Tensor> trace;
  trace.reserve(2 * opt.iters);
  Tensor l = augment_with_slack(a, opt.slack_init);
  for (std::size_t k = 0; k < opt.iters; ++k) {
    detail::normalize_rows(l);
    trace.push_back(l);
    detail::normalize_cols(l);
    trace.push_back(l);
  }
  return trace;
}

/// Differentiable slack Sinkhorn: N x M scores -> (N+1) x (M+1) soft matrix.
inline Var sinkhorn(const Var& a, const SinkhornOptions& opt = {}) {
  auto trace = sinkhorn_log_trace(a.value(), opt);
  Tensor out = trace.back();
  for (auto& v : out.values()) v = std::exp(v);
  Tensor saved_out = out;
  return a.graph()->record(
      std::move(out), {a},
      [a, trace = std::move(trace), saved_out = std::move(saved_out)](Graph& g, const Tensor& gy) {
        Tensor* ga = g.grad_buffer(a);
        if (!ga) return;
        Tensor d = gy;
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= saved_out[k];
        const std::size_t r = d.rows(), c = d.cols();
        // y = x - lse(x) along a line gives dx = dy - softmax(x) * sum(dy), and softmax(x) = exp(y).
        for (std::size_t step = trace.size(); step-- > 0;) {
          const Tensor& y = trace[step];
          if (step % 2 == 1) {
            for (std::size_t j = 0; j + 1 < c; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i) s += d(i, j);
              for (std::size_t i = 0; i < r; ++i) d(i, j) -= std::exp(y(i, j)) * s;
            }
          } else {
            for (std::size_t i = 0; i + 1 < r; ++i) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j) s += d(i, j);
              for (std::size_t j = 0; j < c; ++j) d(i, j) -= std::exp(y(i, j)) * s;
            }
          }
        }
        for (std::size_t i = 0; i + 1 < r; ++i)
          for (std::size_t j = 0; j + 1 < c; ++j) (*ga)(i, j) += d(i, j);
      });
}

inline SlackCorrespondenceMatrix sinkhorn_slack(const Tensor& a, const SinkhornOptions& opt = {}) {
  Graph g;
  return SlackCorrespondenceMatrix(sinkhorn(g.constant(a), opt).value());
}

/// Largest deviation from 1 over all non-slack row and column sums.
inline double max_marginal_error(const SlackCorrespondenceMatrix& c) {
  double worst = 0.0;
  const auto& v = c.values;
  for (std::size_t i = 0; i < c.n(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= c.m(); ++j) s += v(i, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  for (std::size_t j = 0; j < c.m(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i <= c.n(); ++i) s += v(i, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

}  // namespace utopic::matching
