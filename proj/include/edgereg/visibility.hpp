#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "edgereg/geometry.hpp"
#include "edgereg/voxel_map.hpp"

namespace edgereg {

/// Spherical mirror flip around `center`: p -> C + F(p - C) with
/// F(q) = q + 2 (R - |q|) q / |q| and R = phi / 2, so the flipped point sits at
/// distance phi - |p - C| from C.
/// Throws PhiTooSmall when phi < max |p - C| and PointAtCenter for p == C.
std::vector<Vec3> ghpr_transform(std::span<const Vec3> points, const Vec3& center, double phi);

/// Indices (ascending) of points whose flipped image lies on the convex hull
/// of the flipped set together with `center`.
std::vector<std::uint32_t> visible_points(std::span<const Vec3> points, const Vec3& center, double phi,
                                          double tol_rel = 1e-9);

struct Viewpoint {
  Pose pose;  // world -> camera
  CameraIntrinsics intrinsics;
  double fov_widen = 1.1;  // multiplies each frustum half-angle
  double max_dist = 20.0;
  double phi_scale = 2.0;  // GHPR mirror parameter phi = phi_scale * max_dist
  int dilation = 1;        // rings of 26-neighbours added around visible leaves
};

struct RoiResult {
  std::vector<VoxelKey> visible_keys;     // sorted, after dilation
  std::vector<VoxelKey> hull_keys;        // sorted, hull-visible leaves before dilation
  std::vector<VoxelKey> candidate_keys;   // sorted, leaves inside range and widened frustum
  // Hull visibility is evaluated on all in-range leaves in front of the camera,
  // then restricted to the frustum, so widening never removes a leaf.
  std::vector<std::uint32_t> point_indices;  // sorted, into the map's points
  bool empty_roi = false;

  bool contains(const VoxelKey& k) const;
};

/// True if a camera-frame point lies inside the frustum with half-angles scaled by `widen`.
bool in_widened_frustum(const CameraIntrinsics& intr, const Vec3& p_cam, double widen);

RoiResult select_roi(const VoxelMap& map, const Viewpoint& vp);

/// Every occupied leaf, for running the downstream stages on the whole map.
RoiResult full_roi(const VoxelMap& map);

}  // namespace edgereg
