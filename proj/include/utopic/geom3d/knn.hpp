#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "utopic/geom3d/point_cloud.hpp"

namespace utopic::geom3d {

/// Indices of the k nearest points to pc[query] by exhaustive scan. Ties on
/// distance go to the lower index; with `exclude_self` the query index itself
/// is skipped (coincident duplicates are still returned).
inline std::vector<std::size_t> knn(const PointCloud& pc, std::size_t query, std::size_t k, bool exclude_self) {
  const std::size_t n = pc.size();
  if (query >= n) throw ContractError("knn: query index out of range");
  if (k >= n) throw ContractError("knn: k must be smaller than the cloud size");
  const Vec3& q = pc[query];
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (exclude_self && j == query) continue;
    cand.emplace_back((pc[j] - q).squaredNorm(), j);
  }
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  std::vector<std::size_t> out(k);
  for (std::size_t t = 0; t < k; ++t) out[t] = cand[t].second;
  return out;
}

/// Row-major N x k table of knn() for every point.
inline std::vector<std::size_t> knn_table(const PointCloud& pc, std::size_t k, bool exclude_self) {
  std::vector<std::size_t> table;
  table.reserve(pc.size() * k);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    auto row = knn(pc, i, k, exclude_self);
    table.insert(table.end(), row.begin(), row.end());
  }
  return table;
}

/// Index of the point of `pc` closest to `q` (lowest index on ties).
inline std::size_t nearest(const PointCloud& pc, const Vec3& q) {
  if (pc.empty()) throw ContractError("nearest: empty cloud");
  std::size_t best = 0;
  double bd = (pc[0] - q).squaredNorm();
  for (std::size_t j = 1; j < pc.size(); ++j) {
    const double d = (pc[j] - q).squaredNorm();
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  return best;
}

}  // namespace utopic::geom3d
