#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "utopic/geom3d/transform.hpp"
#include "utopic/json_util.hpp"

namespace utopic::training {

using geom3d::RigidTransform;

/// Geodesic angle between two rotations, degrees in [0, 180].
inline double rotation_error_deg(const geom3d::Mat3& r_pred, const geom3d::Mat3& r_gt) {
  return geom3d::rotation_angle_deg(r_gt.transpose() * r_pred);
}

inline double translation_error(const RigidTransform& pred, const RigidTransform& gt) {
  return (pred.translation - gt.translation).norm();
}

/// a - b wrapped into (-180, 180].
inline double angle_difference_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

/// Fraction of points whose score thresholded at 0.5 equals the label.
inline double overlap_accuracy(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("overlap_accuracy: length mismatch");
  if (scores.empty()) return 1.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hit += ((scores[i] >= 0.5 ? 1 : 0) == labels[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

/// Inputs of one evaluated pair.
struct PairOutcome {
  RigidTransform pred, gt;
  std::vector<double> scores;  // both clouds concatenated
  std::vector<int> labels;
  bool failed = false;
  double chamfer = 0.0;
};

struct PairMetrics {
  geom3d::Vec3 euler_diff = geom3d::Vec3::Zero();  // deg, per axis
  geom3d::Vec3 trans_diff = geom3d::Vec3::Zero();
  double err_r = 0.0, err_t = 0.0, oa = 0.0, chamfer = 0.0;
  std::size_t points = 0;
  bool failed = false;
};

struct MetricReport {
  std::vector<PairMetrics> pairs;
  double rmse_r = 0.0, mae_r = 0.0, rmse_t = 0.0, mae_t = 0.0;
  double err_r = 0.0, err_t = 0.0, oa = 0.0, chamfer = 0.0;
  std::size_t failures = 0;
};

inline PairMetrics pair_metrics(const PairOutcome& o) {
  PairMetrics m;
  const auto ep = geom3d::euler_from_rotation(o.pred.rotation);
  const auto eg = geom3d::euler_from_rotation(o.gt.rotation);
  for (int k = 0; k < 3; ++k) m.euler_diff[k] = angle_difference_deg(ep[k], eg[k]);
  m.trans_diff = o.pred.translation - o.gt.translation;
  m.err_r = rotation_error_deg(o.pred.rotation, o.gt.rotation);
  m.err_t = translation_error(o.pred, o.gt);
  m.oa = overlap_accuracy(o.scores, o.labels);
  m.points = o.scores.size();
  m.chamfer = o.chamfer;
  m.failed = o.failed;
  return m;
}

/// RMSE/MAE over Euler angle and translation components, mean isotropic
/// errors, and OA pooled over all points.
inline MetricReport eval_metrics(const std::vector<PairOutcome>& outcomes) {
  MetricReport r;
  double se_r = 0.0, ae_r = 0.0, se_t = 0.0, ae_t = 0.0, hits = 0.0;
  std::size_t pts = 0;
  for (const auto& o : outcomes) {
    const auto m = pair_metrics(o);
    for (int k = 0; k < 3; ++k) {
      se_r += m.euler_diff[k] * m.euler_diff[k];
      ae_r += std::abs(m.euler_diff[k]);
      se_t += m.trans_diff[k] * m.trans_diff[k];
      ae_t += std::abs(m.trans_diff[k]);
    }
    r.err_r += m.err_r;
    r.err_t += m.err_t;
    r.chamfer += m.chamfer;
    hits += m.oa * static_cast<double>(m.points);
    pts += m.points;
    r.failures += m.failed ? 1 : 0;
    r.pairs.push_back(m);
  }
  if (outcomes.empty()) return r;
  const double n = static_cast<double>(outcomes.size());
  r.rmse_r = std::sqrt(se_r / (3.0 * n));
  r.mae_r = ae_r / (3.0 * n);
  r.rmse_t = std::sqrt(se_t / (3.0 * n));
  r.mae_t = ae_t / (3.0 * n);
  r.err_r /= n;
  r.err_t /= n;
  r.chamfer /= n;
  r.oa = pts ? hits / static_cast<double>(pts) : 1.0;
  return r;
}

inline constexpr const char* kMetricColumns = "rmse_r,mae_r,rmse_t,mae_t,err_r,err_t,oa";

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

/// One row per pair, then an aggregate row labelled "all".
inline std::string metrics_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "pair," << kMetricColumns << ",chamfer,failed\n";
  for (std::size_t k = 0; k < r.pairs.size(); ++k) {
    const auto& m = r.pairs[k];
    double se_r = 0, ae_r = 0, se_t = 0, ae_t = 0;
    for (int a = 0; a < 3; ++a) {
      se_r += m.euler_diff[a] * m.euler_diff[a];
      ae_r += std::abs(m.euler_diff[a]);
      se_t += m.trans_diff[a] * m.trans_diff[a];
      ae_t += std::abs(m.trans_diff[a]);
    }
    out << k << ',' << fmt(std::sqrt(se_r / 3)) << ',' << fmt(ae_r / 3) << ',' << fmt(std::sqrt(se_t / 3)) << ','
        << fmt(ae_t / 3) << ',' << fmt(m.err_r) << ',' << fmt(m.err_t) << ',' << fmt(m.oa) << ',' << fmt(m.chamfer)
        << ',' << (m.failed ? 1 : 0) << '\n';
  }
  out << "all," << fmt(r.rmse_r) << ',' << fmt(r.mae_r) << ',' << fmt(r.rmse_t) << ',' << fmt(r.mae_t) << ','
      << fmt(r.err_r) << ',' << fmt(r.err_t) << ',' << fmt(r.oa) << ',' << fmt(r.chamfer) << ',' << r.failures
      << '\n';
  return out.str();
}

inline Json to_json(const MetricReport& r) {
  return Json{{"pairs", r.pairs.size()}, {"rmse_r", r.rmse_r}, {"mae_r", r.mae_r},     {"rmse_t", r.rmse_t},
              {"mae_t", r.mae_t},        {"err_r", r.err_r},   {"err_t", r.err_t},     {"oa", r.oa},
              {"chamfer", r.chamfer},    {"failures", r.failures}, {"euler_convention", geom3d::kEulerConvention}};
}

}  // namespace utopic::training
