#pragma once

#include <string>
#include <vector>

#include "utopic/json_util.hpp"
#include "utopic/matching/lap.hpp"
#include "utopic/network/model.hpp"
#include "utopic/registration/solver.hpp"

namespace utopic::registration {

using geom3d::PointCloud;

enum class Mode { train, infer };

struct Diagnostics {
  std::size_t sinkhorn_iters = 0;
  std::size_t num_correspondences = 0;
  double conditioning = 0.0;
  bool reflection_corrected = false;
  bool failed = false;
  std::string failure;
};

struct RegistrationResult {
  RigidTransform transform;
  SlackCorrespondenceMatrix hard_correspondence;
  std::vector<WeightedPair> weights;
  std::vector<double> overlap_p, overlap_q;
  std::vector<double> uncertainty_p, uncertainty_q;
  Diagnostics diagnostics;
};

inline std::vector<double> column_values(const diffmath::Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

/// Fits the transform from a hard correspondence and overlap scores. Sets the
/// failure flag (identity transform) when fewer than 3 pairs are usable.
inline void solve_from_correspondence(const PointCloud& p, const PointCloud& q, RegistrationResult& r) {
  try {
    r.weights = correspondence_weights(r.hard_correspondence, r.overlap_p, r.overlap_q);
    r.diagnostics.num_correspondences = r.weights.size();
    std::vector<Vec3> ps, qs;
    std::vector<double> ws;
    for (const auto& c : r.weights) {
      ps.push_back(p[c.i]);
      qs.push_back(q[c.j]);
      ws.push_back(c.w);
    }
    const auto sol = weighted_svd(ps, qs, ws);
    r.transform = sol.transform;
    r.diagnostics.conditioning = sol.conditioning;
    r.diagnostics.reflection_corrected = sol.reflection_corrected;
  } catch (const NoCorrespondence& e) {
    r.transform = RigidTransform::identity();
    r.diagnostics.failed = true;
    r.diagnostics.failure = e.what();
  } catch (const UnderDeterminedError& e) {
    r.transform = RigidTransform::identity();
    r.diagnostics.failed = true;
    r.diagnostics.failure = e.what();
  }
}

/// Full pipeline on one pair: network forward, hard assignment, weighted
/// rigid solve. Never throws for a degenerate assignment; see diagnostics.
template <class R>
RegistrationResult register_pair(const PointCloud& p, const PointCloud& q, const network::Model& model, Mode mode,
                                 R& rng) {
  diffmath::Graph g;
  const auto fw = network::forward_pair(g, model, p, q, rng, mode == Mode::train);
  RegistrationResult r;
  r.overlap_p = column_values(fw.overlap_p.value());
  r.overlap_q = column_values(fw.overlap_q.value());
  r.uncertainty_p = column_values(fw.dist_p.uncertainty.value());
  r.uncertainty_q = column_values(fw.dist_q.uncertainty.value());
  r.diagnostics.sinkhorn_iters = model.config().sinkhorn_iters;
  r.hard_correspondence = matching::lap_solve(SlackCorrespondenceMatrix(fw.soft_final.value()));
  solve_from_correspondence(p, q, r);
  return r;
}

inline Json to_json(const RegistrationResult& r) {
  Json rot = Json::array();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) rot.push_back(r.transform.rotation(a, b));
  Json pairs = Json::array();
  for (const auto& c : r.weights) pairs.push_back({c.i, c.j, c.w});
  return Json{{"rotation", rot},
              {"translation", {r.transform.translation.x(), r.transform.translation.y(), r.transform.translation.z()}},
              {"failed", r.diagnostics.failed},
              {"failure", r.diagnostics.failure},
              {"correspondences", pairs},
              {"overlap_source", r.overlap_p},
              {"overlap_target", r.overlap_q},
              {"uncertainty_source", r.uncertainty_p},
              {"uncertainty_target", r.uncertainty_q},
              {"diagnostics",
               {{"sinkhorn_iters", r.diagnostics.sinkhorn_iters},
                {"num_correspondences", r.diagnostics.num_correspondences},
                {"conditioning", r.diagnostics.conditioning},
                {"reflection_corrected", r.diagnostics.reflection_corrected}}}};
}

}  // namespace utopic::registration
