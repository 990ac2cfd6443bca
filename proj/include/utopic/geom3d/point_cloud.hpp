#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <vector>

#include "utopic/diffmath/tensor.hpp"

namespace utopic::geom3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered set of 3D points in model units, with optional integer labels.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;  // empty, or one entry per point

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }
  Vec3& operator[](std::size_t i) { return points[i]; }

  bool all_finite() const {
    for (const auto& p : points)
      if (!p.allFinite()) return false;
    return true;
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
  }

  /// N x 3 row-major copy.
  diffmath::Tensor to_tensor() const {
    diffmath::Tensor t(points.size(), 3);
    for (std::size_t i = 0; i < points.size(); ++i)
      for (int k = 0; k < 3; ++k) t(i, k) = points[i][k];
    return t;
  }

  static PointCloud from_tensor(const diffmath::Tensor& t) {
    if (t.cols() != 3) throw DimensionError("PointCloud::from_tensor: expects N x 3");
    PointCloud pc;
    pc.points.reserve(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) pc.points.emplace_back(t(i, 0), t(i, 1), t(i, 2));
    return pc;
  }

  /// Points reordered so that out[i] = in[order[i]]; labels follow.
  PointCloud permuted(const std::vector<std::size_t>& order) const {
    PointCloud out;
    out.points.reserve(order.size());
    for (std::size_t i : order) out.points.push_back(points.at(i));
    if (!labels.empty())
      for (std::size_t i : order) out.labels.push_back(labels.at(i));
    return out;
  }
};

}  // namespace utopic::geom3d
