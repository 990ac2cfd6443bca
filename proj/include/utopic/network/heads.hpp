#pragma once

#include "utopic/diffmath/mlp.hpp"
#include "utopic/geom3d/point_cloud.hpp"
#include "utopic/network/layout.hpp"

namespace utopic::network {

using diffmath::Graph;
using diffmath::Var;

/// Per-point overlap probability in (0, 1): N x V -> N x 1.
inline Var predict_overlap_scores(Graph& g, const ParamStore& store, const ModelLayout& layout, const Var& f) {
  return diffmath::mlp_forward(g, store, layout.overlap_head, f);
}

/// Max-pool over points, MLP, reshape to n_out x 3 (training-only head).
inline Var coarse_completion(Graph& g, const ParamStore& store, const ModelLayout& layout, const Var& f) {
  Var pooled = diffmath::max_rows(f);
  Var flat = diffmath::mlp_forward(g, store, layout.completion, pooled);
  return diffmath::reshape(flat, layout.config.completion_points, 3);
}

inline geom3d::PointCloud coarse_completion_cloud(const ParamStore& store, const ModelLayout& layout,
                                                  const Tensor& features) {
  Graph g;
  return geom3d::PointCloud::from_tensor(coarse_completion(g, store, layout, g.constant(features)).value());
}

}  // namespace utopic::network
