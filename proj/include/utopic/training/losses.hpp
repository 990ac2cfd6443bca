#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "utopic/diffmath/ops.hpp"
#include "utopic/matching/correspondence.hpp"
#include "utopic/network/uncertainty.hpp"

namespace utopic::training {

using diffmath::Graph;
using diffmath::Tensor;
using diffmath::Var;

inline constexpr double kProbClamp = 1e-9;

enum class Reduction { sum, mean };

namespace detail {

inline double clamp_prob(double c) { return std::clamp(c, kProbClamp, 1.0 - kProbClamp); }

/// d/dc of -[y ln c + (1-y) ln(1-c)] with c clamped; 0 where the clamp is active.
inline double bce_grad(double c, double y) {
  if (c < kProbClamp || c > 1.0 - kProbClamp) return 0.0;
  return -y / c + (1.0 - y) / (1.0 - c);
}

inline double bce(double c, double y) {
  const double cc = clamp_prob(c);
  return -(y * std::log(cc) + (1.0 - y) * std::log(1.0 - cc));
}

}  // namespace detail

/// Binary cross entropy of the non-slack block of `soft` against `gt`.
inline Var registration_loss(const Var& soft, const matching::SlackCorrespondenceMatrix& gt,
                             Reduction reduction = Reduction::sum) {
  const Tensor& c = soft.value();
  if (!c.same_shape(gt.values)) {
    throw DimensionError("registration_loss: prediction " + c.shape_string() + " vs ground truth " +
                         gt.values.shape_string());
  }
  const std::size_t n = gt.n(), m = gt.m();
  const double scale = reduction == Reduction::mean && n * m > 0 ? 1.0 / static_cast<double>(n * m) : 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) total += detail::bce(c(i, j), gt(i, j));
  Tensor labels = gt.values;
  return soft.graph()->record(Tensor::scalar(total * scale), {soft},
                              [soft, labels = std::move(labels), n, m, scale](Graph& g, const Tensor& gy) {
                                Tensor* gs = g.grad_buffer(soft);
                                if (!gs) return;
                                const Tensor& c = soft.value();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < m; ++j)
                                    (*gs)(i, j) += gy[0] * scale * detail::bce_grad(c(i, j), labels(i, j));
                              });
}

/// Mean binary cross entropy of an N x 1 probability column against 0/1 labels.
inline Var bce_mean(const Var& prob, const std::vector<int>& labels) {
  const Tensor& c = prob.value();
  if (c.cols() != 1 || c.rows() != labels.size() || labels.empty()) {
    throw DimensionError("bce_mean: expects an N x 1 column and N labels");
  }
  const double inv = 1.0 / static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += detail::bce(c[i], labels[i]);
  return prob.graph()->record(Tensor::scalar(total * inv), {prob}, [prob, labels, inv](Graph& g, const Tensor& gy) {
    Tensor* gp = g.grad_buffer(prob);
    if (!gp) return;
    const Tensor& c = prob.value();
    for (std::size_t i = 0; i < labels.size(); ++i) (*gp)[i] += gy[0] * inv * detail::bce_grad(c[i], labels[i]);
  });
}

/// Overlap classification loss of one cloud (sum over the two clouds is the
/// caller's job).
inline Var overlap_loss(const Var& scores, const std::vector<int>& labels) { return bce_mean(scores, labels); }

/// KL(N(mu, sigma^2) || N(0, 1)) averaged over points.
inline Var gaussian_kl(const Var& mu, const Var& sigma) {
  Var var = diffmath::square(sigma);
  Var terms = diffmath::sub(diffmath::add(var, diffmath::square(mu)), diffmath::add_scalar(diffmath::log(var), 1.0));
  return diffmath::scale(diffmath::mean(terms), 0.5);
}

/// lambda * BCE(sigmoid(o), labels) + eta * KL for one cloud, where o is a
/// single fresh reparameterised draw.
template <class R>
Var uncertainty_loss(Graph& g, const network::OverlapDistribution& dist, const std::vector<int>& labels,
                     double lambda, double eta, R& rng) {
  Var draw = network::draw_scores(g, dist.mu, dist.sigma, 1, rng);
  Var bce = bce_mean(diffmath::sigmoid(draw), labels);
  return diffmath::add(diffmath::scale(bce, lambda), diffmath::scale(gaussian_kl(dist.mu, dist.sigma), eta));
}

/// Chamfer distance: the average of the two directed mean squared
/// nearest-neighbour distances. Differentiable in `pred` (n x 3).
inline Var chamfer_loss(const Var& pred, const Tensor& gt) {
  const Tensor& p = pred.value();
  if (p.cols() != 3 || gt.cols() != 3 || p.rows() == 0 || gt.rows() == 0) {
    throw ContractError("chamfer_loss: both clouds must be non-empty N x 3");
  }
  const std::size_t n = p.rows(), m = gt.rows();
  auto d2 = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += (p(i, k) - gt(j, k)) * (p(i, k) - gt(j, k));
    return s;
  };
  std::vector<std::size_t> nn_p(n), nn_g(m);
  std::vector<double> best_g(m, std::numeric_limits<double>::infinity());
  double sum_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const double d = d2(i, j);
      if (d < best) {
        best = d;
        nn_p[i] = j;
      }
      if (d < best_g[j]) {
        best_g[j] = d;
        nn_g[j] = i;
      }
    }
    sum_p += best;
  }
  double sum_g = 0.0;
  for (double d : best_g) sum_g += d;
  const double wp = 0.5 / static_cast<double>(n), wg = 0.5 / static_cast<double>(m);
  return pred.graph()->record(
      Tensor::scalar(wp * sum_p + wg * sum_g), {pred},
      [pred, gt, nn_p = std::move(nn_p), nn_g = std::move(nn_g), wp, wg](Graph& g, const Tensor& gy) {
        Tensor* gp = g.grad_buffer(pred);
        if (!gp) return;
        const Tensor& p = pred.value();
        for (std::size_t i = 0; i < nn_p.size(); ++i)
          for (std::size_t k = 0; k < 3; ++k) (*gp)(i, k) += gy[0] * wp * 2.0 * (p(i, k) - gt(nn_p[i], k));
        for (std::size_t j = 0; j < nn_g.size(); ++j)
          for (std::size_t k = 0; k < 3; ++k) (*gp)(nn_g[j], k) += gy[0] * wg * 2.0 * (p(nn_g[j], k) - gt(j, k));
      });
}

inline double chamfer_distance(const Tensor& a, const Tensor& b) {
  Graph g;
  return chamfer_loss(g.constant(a), b).value().item();
}

}  // namespace utopic::training
