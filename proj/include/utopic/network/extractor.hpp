#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <vector>

#include "utopic/diffmath/mlp.hpp"
#include "utopic/geom3d/knn.hpp"
#include "utopic/network/layout.hpp"

namespace utopic::network {

using diffmath::Graph;
using diffmath::Var;
using geom3d::PointCloud;

/// Network input: coordinates relative to the cloud's own centroid.
inline Tensor centered_coordinates(const PointCloud& pc) {
  Tensor x = pc.to_tensor();
  const auto c = pc.centroid();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < 3; ++k) x(i, k) -= c[static_cast<int>(k)];
  return x;
}

/// Rigid-motion invariant per-point input, kLocalDescriptorWidth columns.
/// At two neighbourhood sizes (k_local and 4 k_local, self included): the
/// square roots of the covariance eigenvalues in decreasing order, the
/// distance to the neighbourhood centroid and its component along the
/// smallest-eigenvalue axis; then the mean distance to the k_local nearest
/// neighbours. Lengths are scaled by 10 so unit-size shapes give O(1) inputs.
inline Tensor local_descriptors(const PointCloud& pc, std::size_t k_local) {
  constexpr double scale = 10.0;
  const std::size_t n = pc.size();
  Tensor out(n, kLocalDescriptorWidth);
  const std::size_t ks[2] = {std::min(k_local, n - 1), std::min(4 * k_local, n - 1)};
  for (std::size_t s = 0; s < 2; ++s) {
    const auto table = geom3d::knn_table(pc, ks[s], true);
    for (std::size_t i = 0; i < n; ++i) {
      geom3d::Vec3 mean = pc[i];
      for (std::size_t t = 0; t < ks[s]; ++t) mean += pc[table[i * ks[s] + t]];
      mean /= static_cast<double>(ks[s] + 1);
      geom3d::Mat3 cov = (pc[i] - mean) * (pc[i] - mean).transpose();
      for (std::size_t t = 0; t < ks[s]; ++t) {
        const geom3d::Vec3 d = pc[table[i * ks[s] + t]] - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(ks[s] + 1);
      const Eigen::SelfAdjointEigenSolver<geom3d::Mat3> es(cov);
      const auto& ev = es.eigenvalues();  // ascending
      const geom3d::Vec3 off = pc[i] - mean;
      const std::size_t c0 = s * 5;
      for (int e = 0; e < 3; ++e) out(i, c0 + e) = scale * std::sqrt(std::max(ev[2 - e], 0.0));
      out(i, c0 + 3) = scale * off.norm();
      out(i, c0 + 4) = scale * std::abs(off.dot(es.eigenvectors().col(0)));
      if (s == 0) {
        double md = 0.0;
        for (std::size_t t = 0; t < ks[0]; ++t) md += (pc[table[i * ks[0] + t]] - pc[i]).norm();
        out(i, 10) = scale * md / static_cast<double>(ks[0]);
      }
    }
  }
  return out;
}

/// One local-graph layer: out_i = act(max_j W [f_i, f_j - f_i] + b) over the
/// neighbours j of i. The activation is monotone, so the max moves inside:
/// act(f_i (W_top - W_bot) + b + max_j f_j W_bot).
inline Var edge_layer(Graph& g, const ParamStore& store, std::size_t layer, const Var& f,
                      const std::vector<std::size_t>& neighbors, std::size_t k) {
  Var w = g.param(store, ModelLayout::edge_weight(layer));
  Var b = g.param(store, ModelLayout::edge_bias(layer));
  const std::size_t in = f.cols();
  if (w.rows() != 2 * in) {
    throw DimensionError("edge layer " + std::to_string(layer) + ": weight " + w.value().shape_string() +
                         " does not fit input width " + std::to_string(in));
  }
  Var w_top = diffmath::slice(w, 0, in, 0, w.cols());
  Var w_bot = diffmath::slice(w, in, in, 0, w.cols());
  Var center = diffmath::add_row(diffmath::matmul(f, diffmath::sub(w_top, w_bot)), b);
  Var edge = diffmath::neighbor_max(diffmath::matmul(f, w_bot), neighbors, k);
  return diffmath::leaky_relu(diffmath::add(center, edge), 0.01);
}

/// Per-point features (N x V): stacked edge layers over a fixed Euclidean
/// neighbourhood, all layer outputs concatenated, then a point-wise MLP.
inline Var extract_features(Graph& g, const ParamStore& store, const ModelLayout& layout, const PointCloud& pc) {
  const auto& c = layout.config;
  if (pc.size() < c.k_local + 1) {
    throw ContractError("extract_features: need at least k_local + 1 = " + std::to_string(c.k_local + 1) +
                        " points, got " + std::to_string(pc.size()));
  }
  const auto neighbors = geom3d::knn_table(pc, c.k_local, true);
  Var f = g.constant(c.extractor_input == "xyz" ? centered_coordinates(pc) : local_descriptors(pc, c.k_local));
  std::vector<Var> outs;
  for (std::size_t l = 0; l < c.extractor_channels.size(); ++l) {
    f = edge_layer(g, store, l, f, neighbors, c.k_local);
    outs.push_back(f);
  }
  return diffmath::mlp_forward(g, store, layout.extractor_head, diffmath::concat_cols(outs));
}

}  // namespace utopic::network
