#pragma once

#include <Eigen/SVD>
#include <vector>

#include "utopic/geom3d/transform.hpp"
#include "utopic/matching/correspondence.hpp"

namespace utopic::registration {

using geom3d::Mat3;
using geom3d::RigidTransform;
using geom3d::Vec3;
using matching::SlackCorrespondenceMatrix;

struct WeightedPair {
  std::size_t i = 0;
  std::size_t j = 0;
  double w = 0.0;
};

/// w(i, j) = o_i^P o_j^Q normalised over the selected non-slack pairs.
inline std::vector<WeightedPair> correspondence_weights(const SlackCorrespondenceMatrix& hard,
                                                        const std::vector<double>& overlap_p,
                                                        const std::vector<double>& overlap_q) {
  if (overlap_p.size() != hard.n() || overlap_q.size() != hard.m()) {
    throw DimensionError("correspondence_weights: score arrays do not match the correspondence matrix");
  }
  std::vector<WeightedPair> out;
  double total = 0.0;
  for (auto [i, j] : hard.matches()) {
    const double w = overlap_p[i] * overlap_q[j];
    out.push_back({i, j, w});
    total += w;
  }
  if (out.empty()) throw NoCorrespondence("no non-slack correspondence selected");
  if (!(total > 0.0)) {
    // All products underflowed; fall back to uniform weights.
    for (auto& p : out) p.w = 1.0 / static_cast<double>(out.size());
    return out;
  }
  for (auto& p : out) p.w /= total;
  return out;
}

struct SvdSolution {
  RigidTransform transform;
  double conditioning = 0.0;  // sigma_2 / sigma_1 of the cross-covariance
  bool reflection_corrected = false;
};

/// Weighted least-squares rigid fit q ~ R p + t (Kabsch with weights).
inline SvdSolution weighted_svd(const std::vector<Vec3>& p, const std::vector<Vec3>& q, const std::vector<double>& w) {
  if (p.size() != q.size() || p.size() != w.size()) throw DimensionError("weighted_svd: array lengths differ");
  std::size_t positive = 0;
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ContractError("weighted_svd: weights must be finite and >= 0");
    if (x > 0.0) ++positive;
    total += x;
  }
  if (positive < 3) {
    throw UnderDeterminedError("weighted_svd: need at least 3 weighted pairs, got " + std::to_string(positive));
  }
  Vec3 pm = Vec3::Zero(), qm = Vec3::Zero();
  for (std::size_t k = 0; k < p.size(); ++k) {
    pm += (w[k] / total) * p[k];
    qm += (w[k] / total) * q[k];
  }
  Mat3 h = Mat3::Zero();
  for (std::size_t k = 0; k < p.size(); ++k) h += (w[k] / total) * (p[k] - pm) * (q[k] - qm).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  const double d = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Mat3 s = Mat3::Identity();
  s(2, 2) = d;
  SvdSolution out;
  out.transform.rotation = v * s * u.transpose();
  out.transform.translation = qm - out.transform.rotation * pm;
  const auto sv = svd.singularValues();
  out.conditioning = sv(0) > 0.0 ? sv(1) / sv(0) : 0.0;
  out.reflection_corrected = d < 0.0;
  return out;
}

}  // namespace utopic::registration
