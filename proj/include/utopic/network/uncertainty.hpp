#pragma once

#include <random>
#include <vector>

#include "utopic/diffmath/mlp.hpp"
#include "utopic/matching/correspondence.hpp"
#include "utopic/network/layout.hpp"

namespace utopic::network {

using diffmath::Graph;
using diffmath::Var;

inline constexpr double kSigmaFloor = 1e-6;

/// Per-point Gaussian over the overlap score plus K reparameterised draws
/// and the min-max normalised sample variance U.
struct OverlapDistribution {
  Var mu;       // N x 1
  Var sigma;    // N x 1, > 0
  Var samples;  // N x K
  Var uncertainty;  // N x 1 in [0, 1]
};

template <class R>
Tensor standard_normal(std::size_t rows, std::size_t cols, R& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

/// o(k) = mu + eps(k) * sigma with eps drawn from `rng`.
template <class R>
Var draw_scores(Graph& g, const Var& mu, const Var& sigma, std::size_t k, R& rng) {
  Var eps = g.constant(standard_normal(mu.rows(), k, rng));
  return diffmath::add_col(diffmath::mul_col(eps, sigma), mu);
}

/// U = minmax(var_k(o)); all zeros when the variances are (numerically) equal.
inline Var uncertainty_from_samples(const Var& samples) {
  return diffmath::minmax_normalize(diffmath::row_variance(samples), 1e-10);
}

/// minmax(sigma^2): the large-K limit of uncertainty_from_samples.
inline Var expected_uncertainty(const Var& sigma) {
  return diffmath::minmax_normalize(diffmath::square(sigma), 1e-10);
}

/// Mean/std heads on the hybrid features, then K draws.
template <class R>
OverlapDistribution predict_overlap_distribution(Graph& g, const ParamStore& store, const ModelLayout& layout,
                                                 const Var& features, R& rng, std::size_t k) {
  if (k < 2) throw ContractError("predict_overlap_distribution: K must be >= 2");
  OverlapDistribution d;
  d.mu = diffmath::mlp_forward(g, store, layout.mean_head, features);
  d.sigma = diffmath::add_scalar(diffmath::softplus(diffmath::mlp_forward(g, store, layout.std_head, features)),
                                 kSigmaFloor);
  d.samples = draw_scores(g, d.mu, d.sigma, k, rng);
  d.uncertainty = uncertainty_from_samples(d.samples);
  return d;
}

/// F~ = MLP(cat[f_self, C_ns f_other]) scaled row-wise by (1 - U). `gathered`
/// is the soft-gathered partner features C_ns f_other (N x V).
inline Var uncertainty_weighting(Graph& g, const ParamStore& store, const ModelLayout& layout, const Var& f_self,
                                 const Var& gathered, const Var& uncertainty) {
  if (gathered.rows() != f_self.rows() || uncertainty.rows() != f_self.rows() || uncertainty.cols() != 1) {
    throw ContractError("uncertainty_weighting: row counts disagree");
  }
  Var mixed = diffmath::mlp_forward(g, store, layout.weighting, diffmath::concat_cols({f_self, gathered}));
  return diffmath::mul_col(mixed, diffmath::one_minus(uncertainty));
}

/// Non-slack block of a soft correspondence Var ((N+1) x (M+1) -> N x M).
inline Var non_slack_block(const Var& c) { return diffmath::slice(c, 0, c.rows() - 1, 0, c.cols() - 1); }

/// Both directions of the gathering: C_ns F^Q for P, C_ns^T F^P for Q.
struct Gathered {
  Var for_p, for_q;
};

inline Gathered gather_partner_features(const Var& soft, const Var& fp, const Var& fq) {
  Var block = non_slack_block(soft);
  return {diffmath::matmul(block, fq), diffmath::matmul(diffmath::transpose(block), fp)};
}

/// 1 where the row survives the random mask, 0 where U_i > u_i with
/// u_i ~ Uniform(0, 1).
template <class R>
Tensor random_mask_column(const Tensor& uncertainty, R& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor keep(uncertainty.rows(), 1, 1.0);
  for (std::size_t i = 0; i < uncertainty.rows(); ++i)
    if (uncertainty[i] > unit(rng)) keep[i] = 0.0;
  return keep;
}

/// Training: zero row i when U_i exceeds a uniform draw. Inference: identity.
template <class R>
Var random_mask(Graph& g, const Var& features, const Tensor& uncertainty, R& rng, bool training) {
  if (!training) return features;
  if (uncertainty.rows() != features.rows()) throw ContractError("random_mask: one uncertainty per row required");
  return diffmath::mul_col(features, g.constant(random_mask_column(uncertainty, rng)));
}

}  // namespace utopic::network
