#pragma once

#include "knotpersist/geometry.hpp"
#include "knotpersist/seeds.hpp"

#include <Eigen/Geometry>

namespace fixtures {

using knotpersist::PolygonalKnot;
using knotpersist::Vec3;

inline PolygonalKnot unit_square() {
  return PolygonalKnot({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)});
}

inline PolygonalKnot square_side2() {
  return PolygonalKnot({Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(2, 2, 0), Vec3(0, 2, 0)});
}

inline PolygonalKnot triangle() {
  return PolygonalKnot({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2.0, 0)});
}

inline PolygonalKnot rectangle_1x10() {
  return PolygonalKnot({Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(10, 1, 0), Vec3(0, 1, 0)});
}

inline PolygonalKnot hexagon() { return knotpersist::regular_polygon(6); }

inline PolygonalKnot perturbed_32gon() {
  return knotpersist::perturb(knotpersist::regular_polygon(32), 0.02, std::uint64_t{7});
}

inline PolygonalKnot trefoil(std::size_t n = 64) { return knotpersist::torus_knot(2, 3, n); }

inline Eigen::Matrix3d some_rotation() {
  return Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
}

}  // namespace fixtures
