#pragma once

#include <array>
#include <span>
#include <vector>

#include "edgereg/geometry.hpp"

namespace edgereg {

/// Which input points lie on the boundary of their convex hull.
struct HullMembership {
  std::vector<char> on_hull;            // parallel to the input
  std::vector<std::array<int, 3>> faces;  // outward-oriented triangles (3D case only)
  bool planar_fallback = false;         // input was coplanar; a 2D hull in that plane was used
};

/// Quickhull with a distance tolerance of `tol_rel` times the input extent.
/// A point counts as on the hull when it is a hull vertex or lies within the
/// tolerance of the hull boundary. Coplanar input falls back to a 2D hull;
/// collinear input marks the two extreme points (and points within
/// tolerance of them) only.
HullMembership hull_membership(std::span<const Vec3> points, double tol_rel = 1e-9);

}  // namespace edgereg
