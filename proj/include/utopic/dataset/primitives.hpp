#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "utopic/geom3d/point_cloud.hpp"

namespace utopic::dataset {

using geom3d::PointCloud;
using geom3d::Vec3;

enum class ShapeFamily { box, sphere, cylinder, torus };

inline constexpr std::array<ShapeFamily, 4> kAllFamilies{ShapeFamily::box, ShapeFamily::sphere, ShapeFamily::cylinder,
                                                         ShapeFamily::torus};

inline std::string_view family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::box:
      return "box";
    case ShapeFamily::sphere:
      return "sphere";
    case ShapeFamily::cylinder:
      return "cylinder";
    case ShapeFamily::torus:
      return "torus";
  }
  return "unknown";
}

inline std::optional<ShapeFamily> parse_family(std::string_view s) {
  for (auto f : kAllFamilies)
    if (family_name(f) == s) return f;
  return std::nullopt;
}

struct PrimitiveOptions {
  /// Each canonical shape is stretched by an independent factor per axis
  /// drawn from [min_axis_scale, 1]. 1 keeps the canonical proportions.
  double min_axis_scale = 0.5;
  /// Torus tube radius relative to the ring radius.
  double torus_tube_ratio = 0.35;
};

namespace detail {

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

template <class Rng>
SurfaceSample canonical_sample(ShapeFamily f, Rng& rng, double tube) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (f) {
    case ShapeFamily::box: {
      // Six equal faces of [-1, 1]^3.
      const int face = std::min(5, static_cast<int>(unit(rng) * 6.0));
      const int axis = face / 2;
      const double sign = (face % 2 == 0) ? 1.0 : -1.0;
      Vec3 p(u(rng), u(rng), u(rng));
      p[axis] = sign;
      Vec3 n = Vec3::Zero();
      n[axis] = sign;
      return {p, n};
    }
    case ShapeFamily::sphere: {
      Vec3 d;
      do {
        d = Vec3(normal(rng), normal(rng), normal(rng));
      } while (d.norm() < 1e-12);
      d.normalize();
      return {d, d};
    }
    case ShapeFamily::cylinder: {
      // Radius 1, height 2: side area 4*pi, caps 2*pi.
      if (unit(rng) < 2.0 / 3.0) {
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        Vec3 n(std::cos(phi), std::sin(phi), 0.0);
        return {Vec3(n.x(), n.y(), u(rng)), n};
      }
      const double r = std::sqrt(unit(rng));
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      const double sign = unit(rng) < 0.5 ? 1.0 : -1.0;
      return {Vec3(r * std::cos(phi), r * std::sin(phi), sign), Vec3(0, 0, sign)};
    }
    case ShapeFamily::torus: {
      // Ring radius 1; the area element is proportional to 1 + tube*cos(theta).
      double theta;
      do {
        theta = 2.0 * std::numbers::pi * unit(rng);
      } while (unit(rng) * (1.0 + tube) > 1.0 + tube * std::cos(theta));
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      const Vec3 n(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi), std::sin(theta));
      const Vec3 p((1.0 + tube * std::cos(theta)) * std::cos(phi), (1.0 + tube * std::cos(theta)) * std::sin(phi),
                   tube * std::sin(theta));
      return {p, n};
    }
  }
  return {};
}

}  // namespace detail

/// Uniform surface sample of a randomly stretched primitive, centred at the
/// origin and scaled so that the farthest point lies at distance 1.
template <class Rng>
PointCloud sample_primitive(ShapeFamily family, std::size_t n, Rng& rng, const PrimitiveOptions& opt = {}) {
  std::uniform_real_distribution<double> scale_dist(std::min(opt.min_axis_scale, 1.0), 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 s(scale_dist(rng), scale_dist(rng), scale_dist(rng));
  // Stretching by S scales the local area element by det(S) * |S^-1 n|, so
  // rejection on |S^-1 n| keeps the stretched sample area-uniform.
  const double bound = 1.0 / s.minCoeff();
  PointCloud pc;
  pc.points.reserve(n);
  while (pc.size() < n) {
    const auto smp = detail::canonical_sample(family, rng, opt.torus_tube_ratio);
    const double w = smp.normal.cwiseQuotient(s).norm();
    if (unit(rng) * bound > w) continue;
    pc.points.push_back(smp.point.cwiseProduct(s));
  }
  const Vec3 c = pc.centroid();
  double radius = 0.0;
  for (auto& p : pc.points) {
    p -= c;
    radius = std::max(radius, p.norm());
  }
  if (radius > 0.0)
    for (auto& p : pc.points) p /= radius;
  return pc;
}

}  // namespace utopic::dataset
