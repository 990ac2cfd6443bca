#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "utopic/diffmath/graph.hpp"

namespace utopic::diffmath {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMat> cmap(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
inline Eigen::Map<RowMat> mmap(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

inline void require_same_graph(const Var& a, const Var& b) {
  if (a.graph() != b.graph()) throw ContractError("operands recorded on different graphs");
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                         b.value().shape_string());
  }
}

template <class F, class D>
Var unary(const Var& a, F&& f, D&& dfdx_from_xy) {
  const Tensor& x = a.value();
  Tensor y(x.shape(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.graph()->record(std::move(y), {a}, [a, dfdx_from_xy](Graph& g, const Tensor& gy) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    const Tensor& xv = a.value();
    for (std::size_t i = 0; i < xv.size(); ++i) (*ga)[i] += gy[i] * dfdx_from_xy(xv[i]);
  });
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: " + av.shape_string() + " x " + bv.shape_string());
  }
  Tensor out(av.rows(), bv.cols());
  detail::mmap(out).noalias() = detail::cmap(av) * detail::cmap(bv);
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    auto gm = detail::cmap(gy);
    if (Tensor* ga = g.grad_buffer(a)) detail::mmap(*ga).noalias() += gm * detail::cmap(b.value()).transpose();
    if (Tensor* gb = g.grad_buffer(b)) detail::mmap(*gb).noalias() += detail::cmap(a.value()).transpose() * gm;
  });
}

/// a * b^T without materialising the transpose.
inline Var matmul_nt(const Var& a, const Var& b) {
  detail::require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: " + av.shape_string() + " x " + bv.shape_string() + "^T");
  }
  Tensor out(av.rows(), bv.rows());
  detail::mmap(out).noalias() = detail::cmap(av) * detail::cmap(bv).transpose();
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    auto gm = detail::cmap(gy);
    if (Tensor* ga = g.grad_buffer(a)) detail::mmap(*ga).noalias() += gm * detail::cmap(b.value());
    if (Tensor* gb = g.grad_buffer(b)) detail::mmap(*gb).noalias() += gm.transpose() * detail::cmap(a.value());
  });
}

inline Var transpose(const Var& a) {
  return a.graph()->record(a.value().transposed(), {a}, [a](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a)) *ga += gy.transposed();
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    g.accumulate(a, gy);
    g.accumulate(b, gy);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    g.accumulate(a, gy);
    if (Tensor* gb = g.grad_buffer(b))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] -= gy[i];
  });
}

/// Elementwise (Hadamard) product.
inline Var mul(const Var& a, const Var& b) {
  detail::require_same_graph(a, b);
  detail::require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph()->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * b.value()[i];
    if (Tensor* gb = g.grad_buffer(b))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * a.value()[i];
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return a.graph()->record(std::move(out), {a}, [a, s](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += s * gy[i];
  });
}

inline Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return a.graph()->record(std::move(out), {a}, [a](Graph& g, const Tensor& gy) { g.accumulate(a, gy); });
}

/// 1 - a, elementwise.
inline Var one_minus(const Var& a) { return add_scalar(scale(a, -1.0), 1.0); }

/// Adds a 1xC row vector to every row of an NxC matrix.
inline Var add_row(const Var& a, const Var& row) {
  detail::require_same_graph(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: " + av.shape_string() + " + " + rv.shape_string());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  return a.graph()->record(std::move(out), {a, row}, [a, row](Graph& g, const Tensor& gy) {
    g.accumulate(a, gy);
    if (Tensor* gr = g.grad_buffer(row))
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*gr)(0, j) += gy(i, j);
  });
}

/// Scales row i of an NxC matrix by c_i from an Nx1 column.
inline Var mul_col(const Var& a, const Var& col) {
  detail::require_same_graph(a, col);
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("mul_col: " + av.shape_string() + " * " + cv.shape_string());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= cv(i, 0);
  return a.graph()->record(std::move(out), {a, col}, [a, col](Graph& g, const Tensor& gy) {
    const Tensor& av = a.value();
    const Tensor& cv = col.value();
    if (Tensor* ga = g.grad_buffer(a))
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*ga)(i, j) += gy(i, j) * cv(i, 0);
    if (Tensor* gc = g.grad_buffer(col))
      for (std::size_t i = 0; i < gy.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < gy.cols(); ++j) s += gy(i, j) * av(i, j);
        (*gc)(i, 0) += s;
      }
  });
}

/// Adds an Nx1 column to every column of an NxC matrix.
inline Var add_col(const Var& a, const Var& col) {
  detail::require_same_graph(a, col);
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("add_col: " + av.shape_string() + " + " + cv.shape_string());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += cv(i, 0);
  return a.graph()->record(std::move(out), {a, col}, [a, col](Graph& g, const Tensor& gy) {
    g.accumulate(a, gy);
    if (Tensor* gc = g.grad_buffer(col))
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*gc)(i, 0) += gy(i, j);
  });
}

inline Var leaky_relu(const Var& a, double slope = 0.01) {
  return detail::unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline Var sigmoid(const Var& a) {
  return detail::unary(
      a, [](double x) { return stable_sigmoid(x); },
      [](double x) {
        const double s = stable_sigmoid(x);
        return s * (1.0 - s);
      });
}

inline Var softplus(const Var& a) {
  return detail::unary(a, [](double x) { return stable_softplus(x); }, [](double x) { return stable_sigmoid(x); });
}

inline Var exp(const Var& a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

inline Var log(const Var& a) {
  for (double v : a.value().values())
    if (!(v > 0.0)) throw ContractError("log: non-positive input");
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

inline Var square(const Var& a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

/// Row-wise softmax with max subtraction; rows sum to one and never overflow.
inline Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto yr = y.row(i);
    const double m = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) s += (yr[j] = std::exp(xr[j] - m));
    for (auto& v : yr) v /= s;
  }
  Tensor saved = y;
  return a.graph()->record(std::move(y), {a}, [a, saved = std::move(saved)](Graph& g, const Tensor& gy) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    for (std::size_t i = 0; i < saved.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < saved.cols(); ++j) dot += gy(i, j) * saved(i, j);
      for (std::size_t j = 0; j < saved.cols(); ++j) (*ga)(i, j) += saved(i, j) * (gy(i, j) - dot);
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::require_same_graph(parts.front(), p);
    if (p.rows() != n) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
  }
  Tensor out(n, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
    off += v.cols();
  }
  return parts.front().graph()->record(std::move(out), parts, [parts](Graph& g, const Tensor& gy) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t c = p.cols();
      if (Tensor* gp = g.grad_buffer(p))
        for (std::size_t i = 0; i < gy.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) (*gp)(i, j) += gy(i, off + j);
      off += c;
    }
  });
}

/// Rectangular block [r0, r0+nr) x [c0, c0+nc).
inline Var slice(const Var& a, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
  const Tensor& av = a.value();
  if (r0 + nr > av.rows() || c0 + nc > av.cols()) throw DimensionError("slice: block out of range");
  Tensor out(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) out(i, j) = av(r0 + i, c0 + j);
  return a.graph()->record(std::move(out), {a}, [a, r0, c0](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a))
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) (*ga)(r0 + i, c0 + j) += gy(i, j);
  });
}

inline Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  const Tensor& av = a.value();
  if (rows * cols != av.size()) throw DimensionError("reshape: element count changes");
  Tensor out({rows, cols}, std::vector<double>(av.values().begin(), av.values().end()));
  return a.graph()->record(std::move(out), {a}, [a](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i];
  });
}

/// out(i, c) = max over j in neighbors[i] of a(j, c). `neighbors` is an Nxk
/// row-major index table.
inline Var neighbor_max(const Var& a, std::span<const std::size_t> neighbors, std::size_t k) {
  const Tensor& av = a.value();
  const std::size_t n = av.rows();
  const std::size_t c = av.cols();
  if (k == 0 || neighbors.size() != n * k) throw DimensionError("neighbor_max: index table must be N x k");
  Tensor out(n, c);
  std::vector<std::size_t> arg(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::size_t best = neighbors[i * k];
      double bv = av(best, ch);
      for (std::size_t t = 1; t < k; ++t) {
        const std::size_t j = neighbors[i * k + t];
        if (av(j, ch) > bv) {
          bv = av(j, ch);
          best = j;
        }
      }
      out(i, ch) = bv;
      arg[i * c + ch] = best;
    }
  }
  return a.graph()->record(std::move(out), {a}, [a, arg = std::move(arg), c](Graph& g, const Tensor& gy) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    for (std::size_t i = 0; i < gy.rows(); ++i)
      for (std::size_t ch = 0; ch < c; ++ch) (*ga)(arg[i * c + ch], ch) += gy(i, ch);
  });
}

/// Column-wise max over all rows: NxC -> 1xC.
inline Var max_rows(const Var& a) {
  const Tensor& av = a.value();
  if (av.rows() == 0) throw ContractError("max_rows: empty input");
  Tensor out(1, av.cols());
  std::vector<std::size_t> arg(av.cols(), 0);
  for (std::size_t ch = 0; ch < av.cols(); ++ch) {
    out(0, ch) = av(0, ch);
    for (std::size_t i = 1; i < av.rows(); ++i)
      if (av(i, ch) > out(0, ch)) {
        out(0, ch) = av(i, ch);
        arg[ch] = i;
      }
  }
  return a.graph()->record(std::move(out), {a}, [a, arg = std::move(arg)](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a))
      for (std::size_t ch = 0; ch < arg.size(); ++ch) (*ga)(arg[ch], ch) += gy(0, ch);
  });
}

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.graph()->record(Tensor::scalar(s), {a}, [a](Graph& g, const Tensor& gy) {
    if (Tensor* ga = g.grad_buffer(a))
      for (auto& v : ga->values()) v += gy[0];
  });
}

inline Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

/// Unbiased variance of each row: NxK -> Nx1 (K >= 2).
inline Var row_variance(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t k = av.cols();
  if (k < 2) throw ContractError("row_variance: need at least two columns");
  Tensor out(av.rows(), 1);
  std::vector<double> means(av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double m = 0.0;
    for (double v : av.row(i)) m += v;
    m /= static_cast<double>(k);
    double s = 0.0;
    for (double v : av.row(i)) s += (v - m) * (v - m);
    out(i, 0) = s / static_cast<double>(k - 1);
    means[i] = m;
  }
  return a.graph()->record(std::move(out), {a}, [a, means = std::move(means), k](Graph& g, const Tensor& gy) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < k; ++j)
        (*ga)(i, j) += gy(i, 0) * 2.0 * (av(i, j) - means[i]) / static_cast<double>(k - 1);
  });
}

/// Min-max normalisation of an Nx1 column into [0, 1]. When the range is
/// below `degenerate_range` every output is 0.
inline Var minmax_normalize(const Var& a, double degenerate_range = 1e-10) {
  const Tensor& av = a.value();
  if (av.cols() != 1 || av.rows() == 0) throw DimensionError("minmax_normalize: expects a non-empty column");
  std::size_t imin = 0, imax = 0;
  for (std::size_t i = 1; i < av.rows(); ++i) {
    if (av[i] < av[imin]) imin = i;
    if (av[i] > av[imax]) imax = i;
  }
  const double range = av[imax] - av[imin];
  Tensor out(av.rows(), 1);
  const bool degenerate = !(range > degenerate_range);
  if (!degenerate)
    for (std::size_t i = 0; i < av.rows(); ++i) out[i] = (av[i] - av[imin]) / range;
  Tensor saved = out;
  return a.graph()->record(std::move(out), {a}, [=, saved = std::move(saved)](Graph& g, const Tensor& gy) {
    if (degenerate) return;
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    double to_min = 0.0, to_max = 0.0;
    for (std::size_t i = 0; i < gy.rows(); ++i) {
      (*ga)[i] += gy[i] / range;
      to_min -= gy[i] * (1.0 - saved[i]) / range;
      to_max -= gy[i] * saved[i] / range;
    }
    (*ga)[imin] += to_min;
    (*ga)[imax] += to_max;
  });
}

/// Per-row layer normalisation with learnable 1xC gain and bias.
inline Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  detail::require_same_graph(x, gain);
  detail::require_same_graph(x, bias);
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  if (gain.value().cols() != c || bias.value().cols() != c || gain.rows() != 1 || bias.rows() != 1) {
    throw DimensionError("layer_norm_rows: gain/bias must be 1x" + std::to_string(c));
  }
  Tensor xhat(n, c);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (double v : xv.row(i)) m += v;
    m /= static_cast<double>(c);
    double var = 0.0;
    for (double v : xv.row(i)) var += (v - m) * (v - m);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) xhat(i, j) = (xv(i, j) - m) * inv_std[i];
  }
  Tensor out(n, c);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = gv(0, j) * xhat(i, j) + bv(0, j);
  return x.graph()->record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Tensor& gy) {
        const std::size_t n = xhat.rows();
        const std::size_t c = xhat.cols();
        const Tensor& gv = gain.value();
        if (Tensor* gg = g.grad_buffer(gain))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) (*gg)(0, j) += gy(i, j) * xhat(i, j);
        if (Tensor* gb = g.grad_buffer(bias))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) (*gb)(0, j) += gy(i, j);
        if (Tensor* gx = g.grad_buffer(x)) {
          std::vector<double> dxhat(c);
          for (std::size_t i = 0; i < n; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              dxhat[j] = gy(i, j) * gv(0, j);
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat(i, j);
            }
            mean_d /= static_cast<double>(c);
            mean_dx /= static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j)
              (*gx)(i, j) += inv_std[i] * (dxhat[j] - mean_d - xhat(i, j) * mean_dx);
          }
        }
      });
}

}  // namespace utopic::diffmath
