#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "edgereg/geometry.hpp"

namespace edgereg {

/// Axis-aligned cube at a given octree level. Indices are global lattice
/// indices at that level: the cube spans [origin + idx * size, origin + (idx + 1) * size).
struct VoxelKey {
  int level = 0;
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  std::int64_t iz = 0;

  VoxelKey parent() const { return {level - 1, ix >> 1, iy >> 1, iz >> 1}; }
  VoxelKey child(int octant) const {
    return {level + 1, 2 * ix + (octant & 1), 2 * iy + ((octant >> 1) & 1), 2 * iz + ((octant >> 2) & 1)};
  }
  /// Ancestor at a coarser level.
  VoxelKey ancestor(int at_level) const {
    const int s = level - at_level;
    return {at_level, ix >> s, iy >> s, iz >> s};
  }

  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.level) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.ix) * 0x73856093ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.iy) * 0x19349663ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.iz) * 0x83492791ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

using VoxelKeySet = std::unordered_set<VoxelKey, VoxelKeyHash>;

/// Sparse multi-layer octree over a point set. Roots are `root_size` cubes on
/// a lattice anchored at `origin`; each root is subdivided down to `leaf_size`.
/// Only leaves carry payload: indices into the source point array, which the
/// map shares (prune() returns maps referencing the same points).
class VoxelMap {
 public:
  struct Node {
    std::uint8_t child_mask = 0;
    std::vector<std::uint32_t> points;  // leaves only
  };

  VoxelMap() = default;

  /// Throws InvalidSizes unless root_size / leaf_size is a power of two >= 1.
  static VoxelMap build(std::vector<Vec3> points, double root_size = 2.0, double leaf_size = 0.0625,
                        const Vec3& origin = Vec3::Zero());

  int depth() const { return depth_; }
  double root_size() const { return root_size_; }
  double leaf_size() const { return leaf_size_; }
  const Vec3& origin() const { return origin_; }
  double size_at(int level) const { return root_size_ / static_cast<double>(std::int64_t{1} << level); }

  Vec3 cube_min(const VoxelKey& k) const;
  Vec3 center(const VoxelKey& k) const;

  /// Leaf-level lattice key of an arbitrary position (occupied or not).
  VoxelKey leaf_key_of(const Vec3& p) const;
  /// Occupied leaf containing p under half-open bounds.
  std::optional<VoxelKey> leaf_of(const Vec3& p) const;
  /// Occupied leaves whose cube intersects the closed ball.
  std::vector<VoxelKey> leaves_within(const Vec3& center, double radius) const;
  /// Keeps the leaves for which `keep` is true; empty interior nodes disappear.
  VoxelMap prune(const std::function<bool(const VoxelKey&)>& keep) const;

  bool contains(const VoxelKey& k) const { return nodes_.count(k) != 0; }
  bool is_leaf(const VoxelKey& k) const { return k.level == depth_ && contains(k); }
  const Node* node(const VoxelKey& k) const;
  /// Payload of an occupied leaf; empty span otherwise.
  const std::vector<std::uint32_t>& leaf_points(const VoxelKey& k) const;
  std::vector<VoxelKey> children(const VoxelKey& k) const;

  /// Sorted keys.
  std::vector<VoxelKey> roots() const;
  std::vector<VoxelKey> leaves() const;
  /// Sorted leaves under `k` (k itself if it is a leaf).
  std::vector<VoxelKey> leaves_under(const VoxelKey& k) const;

  std::size_t num_roots() const { return num_roots_; }
  std::size_t num_leaves() const { return num_leaves_; }
  std::size_t num_nodes() const { return nodes_.size(); }

  const std::vector<Vec3>& points() const;
  const Vec3& point(std::uint32_t i) const { return (*points_)[i]; }

 private:
  Vec3 origin_ = Vec3::Zero();
  double root_size_ = 2.0;
  double leaf_size_ = 0.0625;
  int depth_ = 5;
  std::size_t num_roots_ = 0;
  std::size_t num_leaves_ = 0;
  std::shared_ptr<const std::vector<Vec3>> points_;
  std::unordered_map<VoxelKey, Node, VoxelKeyHash> nodes_;
};

/// Closed cube / closed ball intersection test.
bool cube_intersects_ball(const Vec3& cube_min, double size, const Vec3& center, double radius);

}  // namespace edgereg
