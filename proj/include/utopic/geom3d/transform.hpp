#pragma once

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

#include "utopic/geom3d/point_cloud.hpp"

namespace utopic::geom3d {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Element of SE(3): x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 operator()(const Vec3& p) const { return rotation * p + translation; }

  /// R^T R = I and det R = +1, both within `tol`.
  bool is_valid(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

inline PointCloud apply(const RigidTransform& t, const PointCloud& pc) {
  PointCloud out;
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) out.points.push_back(t(p));
  out.labels = pc.labels;
  return out;
}

/// (a ∘ b)(x) = a(b(x)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline RigidTransform inverse(const RigidTransform& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

/// Geodesic angle of a rotation in degrees, in [0, 180]. Uses atan2 on the
/// skew and symmetric parts, which equals arccos((tr R - 1)/2) but keeps full
/// precision near 0 and 180 degrees.
inline double rotation_angle_deg(const Mat3& r) {
  const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * skew.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return rad2deg(std::atan2(s, c));
}

/// Axis uniform on the sphere, angle uniform in [0, max_rot_deg], every
/// translation coordinate uniform in [-max_trans, max_trans]. Not Haar-uniform.
template <class Rng>
RigidTransform random_transform(Rng& rng, double max_rot_deg, double max_trans) {
  if (!(max_rot_deg >= 0.0 && max_rot_deg <= 180.0)) throw ContractError("random_transform: max_rot_deg must be in [0, 180]");
  if (!(max_trans >= 0.0)) throw ContractError("random_transform: max_trans must be >= 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 axis;
  do {
    axis = Vec3(normal(rng), normal(rng), normal(rng));
  } while (axis.norm() < 1e-12);
  axis.normalize();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = deg2rad(max_rot_deg) * unit(rng);
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  for (int k = 0; k < 3; ++k) t.translation[k] = max_trans * (2.0 * unit(rng) - 1.0);
  return t;
}

/// Angles (about x, about y, about z) in degrees for the intrinsic Z-Y-X
/// convention R = Rz(z) * Ry(y) * Rx(x). At gimbal lock the x angle is 0.
inline Vec3 euler_from_rotation(const Mat3& r) {
  const double sy = -r(2, 0);
  if (std::abs(sy) >= 1.0 - 1e-12) {
    const double y = std::copysign(std::numbers::pi / 2.0, sy);
    const double z = std::atan2(-r(0, 1), r(1, 1));
    return {0.0, rad2deg(y), rad2deg(z)};
  }
  const double x = std::atan2(r(2, 1), r(2, 2));
  const double y = std::asin(std::clamp(sy, -1.0, 1.0));
  const double z = std::atan2(r(1, 0), r(0, 0));
  return {rad2deg(x), rad2deg(y), rad2deg(z)};
}

inline Mat3 rotation_from_euler(const Vec3& xyz_deg) {
  return (Eigen::AngleAxisd(deg2rad(xyz_deg[2]), Vec3::UnitZ()) *
          Eigen::AngleAxisd(deg2rad(xyz_deg[1]), Vec3::UnitY()) *
          Eigen::AngleAxisd(deg2rad(xyz_deg[0]), Vec3::UnitX()))
      .toRotationMatrix();
}

/// Name written into metadata so downstream consumers know the convention.
inline constexpr const char* kEulerConvention = "intrinsic-ZYX-degrees(x,y,z)";

}  // namespace utopic::geom3d
