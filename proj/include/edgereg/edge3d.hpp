#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "edgereg/geometry.hpp"
#include "edgereg/visibility.hpp"
#include "edgereg/voxel_map.hpp"

namespace edgereg {

struct PlanePatch {
  VoxelKey key;
  Vec3 cube_min = Vec3::Zero();
  double cube_size = 0.0;
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 eigvals = Vec3::Zero();  // ascending
  std::size_t m = 0;
};

struct Edge3D {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  std::array<Vec3, 2> normals{Vec3::UnitX(), Vec3::UnitY()};

  double length() const { return (b - a).norm(); }
};

struct Edge3dConfig {
  double planarity_ratio = 0.01;  // lambda0 / lambda1
  int min_points = 10;
  double angle_min_deg = 30.0;
  double angle_max_deg = 150.0;
  double min_edge_len = 0.1;
  /// Optional absolute gate lambda0 <= max_lambda0; 0 disables it.
  double max_lambda0 = 0.0;
  /// Normals are flipped to face this point when set, else the +z hemisphere.
  std::optional<Vec3> viewpoint;
  double merge_angle_deg = 1.0;
  /// A merged segment mostly covered by a longer one within this angle and one leaf is dropped.
  double dedup_angle_deg = 10.0;

  void validate() const;  // throws ConfigError
};

/// Covariance plane test on a point set.
std::optional<PlanePatch> plane_test(std::span<const Vec3> points, const Edge3dConfig& cfg = {});

/// Recursive descent over every root touched by the ROI; only ROI leaves contribute points.
/// Sorted by key.
std::vector<PlanePatch> extract_planes(const VoxelMap& map, const RoiResult& roi, const Edge3dConfig& cfg = {});

/// Infinite intersection line clipped to the union of both cubes, each
/// inflated by `inflate` (defaults to the larger cube size).
std::optional<Edge3D> intersect_planes(const PlanePatch& pa, const PlanePatch& pb, const Edge3dConfig& cfg = {},
                                       double inflate = -1.0);

/// Merge segments whose directions agree within cfg.merge_angle_deg, whose
/// lines are within `gap` of each other and whose extents overlap or leave a
/// gap below `gap`. Runs to a fixed point; unmerged segments pass through untouched.
std::vector<Edge3D> merge_collinear(std::vector<Edge3D> edges, const Edge3dConfig& cfg, double gap);

/// Plane-intersection edges supported by points of both planes, merged,
/// deduplicated, refit to the points near each segment, and sorted.
std::vector<Edge3D> extract_edges3d(const VoxelMap& map, const RoiResult& roi, const Edge3dConfig& cfg = {});

/// Closed-cube contact test (shared face, edge or corner).
bool cubes_touch(const PlanePatch& a, const PlanePatch& b, double eps = 1e-9);

}  // namespace edgereg
