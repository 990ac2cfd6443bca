#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "utopic/dataset/primitives.hpp"
#include "utopic/geom3d/knn.hpp"
#include "utopic/geom3d/transform.hpp"
#include "utopic/matching/correspondence.hpp"

namespace utopic::dataset {

using geom3d::RigidTransform;
using matching::SlackCorrespondenceMatrix;

struct GenConfig {
  std::size_t points_per_cloud = 1024;
  double keep_fraction = 0.7;
  double rot_range_deg = 45.0;
  double trans_range = 0.5;
  double noise_sigma = 0.01;
  double noise_clip = 0.05;
  bool shuffle = true;
  double match_radius = 0.075;

  std::size_t keep_count() const {
    return static_cast<std::size_t>(std::llround(keep_fraction * static_cast<double>(points_per_cloud)));
  }

  void validate() const {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ContractError("keep_fraction must be in (0, 1]");
    if (noise_clip < 0.0) throw ContractError("noise_clip must be >= 0");
    if (noise_sigma < 0.0) throw ContractError("noise_sigma must be >= 0");
    if (!(match_radius > 0.0)) throw ContractError("match_radius must be > 0");
    if (keep_count() < 3) throw ContractError("keep_fraction * points_per_cloud must be >= 3");
  }
};

/// How the crops of a sample were made; echoed into meta.json.
struct CropInfo {
  geom3d::Vec3 source_normal = geom3d::Vec3::UnitZ();
  geom3d::Vec3 target_normal = geom3d::Vec3::UnitZ();
  std::size_t kept = 0;
};

struct PairSample {
  PointCloud source;           // P
  PointCloud target;           // Q
  RigidTransform gt_transform;  // maps P into Q's frame
  SlackCorrespondenceMatrix gt_correspondence;
  std::vector<int> gt_overlap_source;
  std::vector<int> gt_overlap_target;
  PointCloud complete_source;  // noise-free uncropped shape, source frame
  PointCloud complete_target;  // same, target frame
  CropInfo crop;
  std::string family;
};

/// C(i,j) = 1 iff q_j is the nearest neighbour of T(p_i) in Q, T(p_i) is the
/// nearest neighbour of q_j in T(P), and |T(p_i) - q_j| < r. Unmatched rows
/// and columns put their 1 in the slack column / row.
inline SlackCorrespondenceMatrix ground_truth_correspondence(const PointCloud& p, const PointCloud& q,
                                                             const RigidTransform& t_gt, double r) {
  if (!(r > 0.0)) throw ContractError("ground_truth_correspondence: r must be > 0");
  const PointCloud tp = geom3d::apply(t_gt, p);
  const std::size_t n = p.size(), m = q.size();
  auto c = SlackCorrespondenceMatrix::zeros(n, m);
  std::vector<std::size_t> nn_pq(n), nn_qp(m);
  for (std::size_t i = 0; i < n; ++i) nn_pq[i] = geom3d::nearest(q, tp[i]);
  for (std::size_t j = 0; j < m; ++j) nn_qp[j] = geom3d::nearest(tp, q[j]);
  std::vector<bool> col_used(m, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = nn_pq[i];
    if (nn_qp[j] == i && (tp[i] - q[j]).norm() < r) {
      c(i, j) = 1.0;
      col_used[j] = true;
    } else {
      c(i, m) = 1.0;
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!col_used[j]) c(n, j) = 1.0;
  return c;
}

struct OverlapLabels {
  std::vector<int> source;
  std::vector<int> target;
};

/// o_i = 1 iff the non-slack part of row i sums to 1; columns likewise.
inline OverlapLabels ground_truth_overlap(const SlackCorrespondenceMatrix& c) {
  OverlapLabels out;
  out.source.resize(c.n());
  out.target.resize(c.m());
  for (std::size_t i = 0; i < c.n(); ++i) out.source[i] = c.row_sum(i) == 1.0 ? 1 : 0;
  for (std::size_t j = 0; j < c.m(); ++j) out.target[j] = c.col_sum(j) == 1.0 ? 1 : 0;
  return out;
}

/// Fraction of source points labelled as overlapping.
inline double overlap_ratio(const PairSample& s) {
  if (s.gt_overlap_source.empty()) return 0.0;
  const double k = std::accumulate(s.gt_overlap_source.begin(), s.gt_overlap_source.end(), 0.0);
  return k / static_cast<double>(s.gt_overlap_source.size());
}

namespace detail {

template <class Rng>
geom3d::Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  geom3d::Vec3 d;
  do {
    d = geom3d::Vec3(normal(rng), normal(rng), normal(rng));
  } while (d.norm() < 1e-12);
  return d.normalized();
}

/// Keeps the `keep` points with the largest projection onto `normal`; the
/// kept points stay in their original relative order.
inline PointCloud halfspace_crop(const PointCloud& pc, const geom3d::Vec3& normal, std::size_t keep) {
  std::vector<std::size_t> idx(pc.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return pc[a].dot(normal) > pc[b].dot(normal); });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return pc.permuted(idx);
}

template <class Rng>
void add_clipped_noise(PointCloud& pc, double sigma, double clip, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : pc.points)
    for (int k = 0; k < 3; ++k) p[k] += std::clamp(sigma * normal(rng), -clip, clip);
}

/// Point files store float32, so generated clouds are rounded the same way and
/// labels computed here match what a reader of the files sees.
inline void round_to_float(PointCloud& pc) {
  // Goes through a float buffer: GCC 11 at -O3 vectorises the in-place
  // double -> float -> double loop over Vec3 wrongly and skips x and y.
  std::vector<float> buf(3 * pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (int k = 0; k < 3; ++k) buf[3 * i + k] = static_cast<float>(pc[i][k]);
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (int k = 0; k < 3; ++k) pc[i][k] = buf[3 * i + k];
}

template <class Rng>
std::vector<std::size_t> random_order(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Fisher-Yates with an explicit draw so the order is library independent.
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(idx[i - 1], idx[d(rng)]);
  }
  return idx;
}

}  // namespace detail

/// Builds one partial-overlap pair from `shape`: two independent half-space
/// crops, the second moved by a random rigid transform, clipped Gaussian
/// noise on both, shuffled point order, and labels on the noisy clouds.
template <class Rng>
PairSample generate_pair(const PointCloud& shape, const GenConfig& cfg, Rng& rng) {
  cfg.validate();
  if (shape.size() < cfg.points_per_cloud) {
    throw GenerationError("generate_pair: shape has " + std::to_string(shape.size()) + " points, need " +
                          std::to_string(cfg.points_per_cloud));
  }
  PointCloud base = shape;
  if (shape.size() > cfg.points_per_cloud) {
    auto order = detail::random_order(shape.size(), rng);
    order.resize(cfg.points_per_cloud);
    std::sort(order.begin(), order.end());
    base = shape.permuted(order);
  }
  base.labels.clear();

  PairSample s;
  s.crop.kept = cfg.keep_count();
  s.crop.source_normal = detail::random_unit(rng);
  s.crop.target_normal = detail::random_unit(rng);
  PointCloud p = detail::halfspace_crop(base, s.crop.source_normal, s.crop.kept);
  PointCloud q = detail::halfspace_crop(base, s.crop.target_normal, s.crop.kept);
  if (p.size() < 3 || q.size() < 3) throw GenerationError("generate_pair: degenerate crop");

  s.gt_transform = geom3d::random_transform(rng, cfg.rot_range_deg, cfg.trans_range);
  q = geom3d::apply(s.gt_transform, q);
  detail::add_clipped_noise(p, cfg.noise_sigma, cfg.noise_clip, rng);
  detail::add_clipped_noise(q, cfg.noise_sigma, cfg.noise_clip, rng);
  detail::round_to_float(p);
  detail::round_to_float(q);
  if (cfg.shuffle) {
    p = p.permuted(detail::random_order(p.size(), rng));
    q = q.permuted(detail::random_order(q.size(), rng));
  }
  s.source = std::move(p);
  s.target = std::move(q);
  s.complete_source = base;
  s.complete_target = geom3d::apply(s.gt_transform, base);
  s.gt_correspondence = ground_truth_correspondence(s.source, s.target, s.gt_transform, cfg.match_radius);
  auto labels = ground_truth_overlap(s.gt_correspondence);
  s.gt_overlap_source = std::move(labels.source);
  s.gt_overlap_target = std::move(labels.target);
  return s;
}

/// Procedural variant: samples a primitive of `family` and crops it.
template <class Rng>
PairSample generate_primitive_pair(ShapeFamily family, const GenConfig& cfg, Rng& rng,
                                   const PrimitiveOptions& opt = {}) {
  PointCloud shape = sample_primitive(family, cfg.points_per_cloud, rng, opt);
  PairSample s = generate_pair(shape, cfg, rng);
  s.family = std::string(family_name(family));
  return s;
}

}  // namespace utopic::dataset
