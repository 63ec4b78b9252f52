#pragma once

#include <cstdint>
#include <vector>

#include "edgereg/point_cloud.hpp"
#include "edgereg/voxel_map.hpp"

namespace edgereg {

/// One LiDAR sweep in world coordinates.
struct ScanRecord {
  int scan_id = 0;
  Vec3 origin = Vec3::Zero();
  std::vector<Vec3> points;
};

struct RemovalParams {
  double voxel_size = 0.0625;
  /// Scales the stop distance before each ray endpoint:
  /// d_stop = voxel_size * (1 + incidence_margin / max(cos(incidence), 0.1)).
  double incidence_margin = 1.0;
  int min_scans_seen_through = 1;
  /// Level recorded in the returned keys (the leaf level of the map they refer to).
  int key_level = 5;
};

/// Voxels crossed by the segment origin -> endpoint, in traversal order,
/// excluding the voxel that contains the endpoint. Exact edge/corner
/// crossings step all tied axes at once.
std::vector<VoxelKey> voxels_on_ray(const Vec3& origin, const Vec3& endpoint, double voxel_size,
                                    int key_level = 0);

/// Stop distance before a ray endpoint inside which voxels are never marked seen-through.
double safe_stop_distance(double voxel_size, double incidence_margin, double cos_incidence);

struct RemovalResult {
  PointCloud merged;                          // all scan points, scan order, scan_id channel set
  PointCloud static_cloud;                    // merged minus points in removed voxels
  PointCloud removed_cloud;
  std::vector<std::uint32_t> static_indices;  // into merged
  std::vector<VoxelKey> removed_keys;         // sorted

  /// Prune predicate for a voxel map built on the same lattice and leaf size.
  bool keep(const VoxelKey& k) const;
};

/// Throws EmptyInput when `scans` is empty and InvalidArgument on bad params.
RemovalResult remove_dynamic(const std::vector<ScanRecord>& scans, const RemovalParams& params = {});

}  // namespace edgereg
