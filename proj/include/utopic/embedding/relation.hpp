#pragma once

#include <Eigen/Geometry>
#include <cmath>
#include <vector>

#include "utopic/diffmath/tensor.hpp"
#include "utopic/geom3d/knn.hpp"

namespace utopic::embedding {

using diffmath::Tensor;
using geom3d::PointCloud;
using geom3d::Vec3;

/// Offsets shorter than this count as zero when forming angles.
inline constexpr double kDegenerateLength = 1e-12;

/// Three N x N channels of the pairwise geometric descriptor g(i, j).
struct RelationEmbedding {
  Tensor rho;    // distance
  Tensor alpha;  // triplet angle, radians
  Tensor eta;    // local triangle perimeter difference

  std::size_t n() const { return rho.rows(); }
  std::size_t scalar_count() const { return rho.size() + alpha.size() + eta.size(); }

  /// g(i, j, c) as a {N, N, 3} tensor.
  Tensor stacked() const {
    const std::size_t n = this->n();
    std::vector<double> data(n * n * 3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double* g = &data[(i * n + j) * 3];
        g[0] = rho(i, j);
        g[1] = alpha(i, j);
        g[2] = eta(i, j);
      }
    return Tensor({n, n, 3}, std::move(data));
  }
};

/// 2-NN table (self excluded) shared by the angle and perimeter channels.
inline std::vector<std::size_t> neighbor_pairs(const PointCloud& pc) { return geom3d::knn_table(pc, 2, true); }

inline Tensor pairwise_distance(const PointCloud& pc) {
  const std::size_t n = pc.size();
  Tensor rho(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) rho(i, j) = rho(j, i) = (pc[i] - pc[j]).norm();
  return rho;
}

/// Angle in [0, pi] between u and v; 0 when either is degenerate.
inline double safe_angle(const Vec3& u, const Vec3& v) {
  if (u.norm() <= kDegenerateLength || v.norm() <= kDegenerateLength) return 0.0;
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

/// alpha(i, j) = angle between (k1 - p_i) + (k2 - p_i) and p_j - p_i.
inline Tensor triplet_angle(const PointCloud& pc, const std::vector<std::size_t>& knn2) {
  const std::size_t n = pc.size();
  if (knn2.size() != 2 * n) throw DimensionError("triplet_angle: expects an N x 2 neighbour table");
  Tensor alpha(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = (pc[knn2[2 * i]] - pc[i]) + (pc[knn2[2 * i + 1]] - pc[i]);
    for (std::size_t j = 0; j < n; ++j) alpha(i, j) = safe_angle(s, pc[j] - pc[i]);
  }
  return alpha;
}

inline std::vector<double> local_perimeters(const PointCloud& pc, const std::vector<std::size_t>& knn2) {
  if (knn2.size() != 2 * pc.size()) throw DimensionError("local_perimeters: expects an N x 2 neighbour table");
  std::vector<double> per(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3& a = pc[knn2[2 * i]];
    const Vec3& b = pc[knn2[2 * i + 1]];
    per[i] = (pc[i] - a).norm() + (pc[i] - b).norm() + (a - b).norm();
  }
  return per;
}

/// eta(i, j) = perimeter of (p_i, its 2-NN) minus that of (p_j, its 2-NN).
inline Tensor perimeter_difference(const PointCloud& pc, const std::vector<std::size_t>& knn2) {
  const auto per = local_perimeters(pc, knn2);
  const std::size_t n = pc.size();
  Tensor eta(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) eta(i, j) = per[i] - per[j];
  return eta;
}

inline RelationEmbedding relation_embedding(const PointCloud& pc) {
  if (pc.size() < 3) throw ContractError("relation_embedding: need at least 3 points");
  const auto knn2 = neighbor_pairs(pc);
  return {pairwise_distance(pc), triplet_angle(pc, knn2), perimeter_difference(pc, knn2)};
}

}  // namespace utopic::embedding
