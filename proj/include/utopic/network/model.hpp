#pragma once

#include "utopic/embedding/relation.hpp"
#include "utopic/matching/sinkhorn.hpp"
#include "utopic/network/attention.hpp"
#include "utopic/network/extractor.hpp"
#include "utopic/network/heads.hpp"
#include "utopic/network/uncertainty.hpp"

namespace utopic::network {

/// A layout together with its parameter values.
struct Model {
  ModelLayout layout;
  ParamStore params;

  explicit Model(const ModelConfig& c, std::uint64_t seed = 0) : layout(c), params(init_model(layout, seed)) {}
  Model(const ModelConfig& c, ParamStore p) : layout(c), params(std::move(p)) {}

  const ModelConfig& config() const { return layout.config; }
};

/// Every intermediate of one forward pass over a pair, as graph values.
struct ForwardPass {
  embedding::RelationEmbedding emb_p, emb_q;
  Var feat_p, feat_q;        // extractor output F
  FeaturePair hybrid;        // first transformer output F^
  Var soft_initial;          // C^ from the first matching block
  OverlapDistribution dist_p, dist_q;
  Var weighted_p, weighted_q;  // F- after weighting (and masking in training)
  FeaturePair refined;       // second transformer output
  Var overlap_p, overlap_q;  // O^, N x 1 and M x 1
  Var soft_final;            // C- used for the hard assignment
};

/// Feature extraction through the final soft correspondence. `training`
/// switches the random mask on; `rng` feeds the K draws and the mask.
template <class R>
ForwardPass forward_pair(Graph& g, const Model& model, const PointCloud& p, const PointCloud& q, R& rng,
                         bool training) {
  const auto& layout = model.layout;
  const auto& store = model.params;
  const auto& c = layout.config;
  if (p.size() < 3 || q.size() < 3) throw ContractError("forward_pair: both clouds need at least 3 points");
  ForwardPass fw;
  fw.emb_p = embedding::relation_embedding(p);
  fw.emb_q = embedding::relation_embedding(q);
  const auto rel_p = RelationVars::record(g, fw.emb_p);
  const auto rel_q = RelationVars::record(g, fw.emb_q);
  const matching::SinkhornOptions sk{c.sinkhorn_iters, c.slack_init};

  fw.feat_p = extract_features(g, store, layout, p);
  fw.feat_q = extract_features(g, store, layout, q);
  fw.hybrid = geometry_transformer(g, store, layout.tf1, fw.feat_p, fw.feat_q, rel_p, rel_q, c.use_geometric);
  fw.soft_initial =
      matching::sinkhorn(matching::affinity(fw.hybrid.p, fw.hybrid.q, g.param(store, ModelLayout::kMatch1)), sk);

  fw.dist_p = predict_overlap_distribution(g, store, layout, fw.hybrid.p, rng, c.samples);
  fw.dist_q = predict_overlap_distribution(g, store, layout, fw.hybrid.q, rng, c.samples);
  if (!training) {
    // Inference uses the expected sample variance, sigma^2, so the result
    // does not depend on which draw lands on which point.
    fw.dist_p.uncertainty = expected_uncertainty(fw.dist_p.sigma);
    fw.dist_q.uncertainty = expected_uncertainty(fw.dist_q.sigma);
  }
  const auto gathered = gather_partner_features(fw.soft_initial, fw.hybrid.p, fw.hybrid.q);
  fw.weighted_p = uncertainty_weighting(g, store, layout, fw.hybrid.p, gathered.for_p, fw.dist_p.uncertainty);
  fw.weighted_q = uncertainty_weighting(g, store, layout, fw.hybrid.q, gathered.for_q, fw.dist_q.uncertainty);
  fw.weighted_p = random_mask(g, fw.weighted_p, fw.dist_p.uncertainty.value(), rng, training);
  fw.weighted_q = random_mask(g, fw.weighted_q, fw.dist_q.uncertainty.value(), rng, training);

  fw.refined = geometry_transformer(g, store, layout.tf2, fw.weighted_p, fw.weighted_q, rel_p, rel_q, c.use_geometric);
  fw.overlap_p = predict_overlap_scores(g, store, layout, fw.refined.p);
  fw.overlap_q = predict_overlap_scores(g, store, layout, fw.refined.q);
  fw.soft_final =
      matching::sinkhorn(matching::affinity(fw.refined.p, fw.refined.q, g.param(store, ModelLayout::kMatch2)), sk);
  return fw;
}

}  // namespace utopic::network
