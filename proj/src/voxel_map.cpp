#include "edgereg/voxel_map.hpp"

#include <algorithm>
#include <cmath>

#include "edgereg/errors.hpp"

namespace edgereg {

namespace {

const std::vector<std::uint32_t> kNoPoints;
const std::vector<Vec3> kNoCloud;

int octant_of(const VoxelKey& child) {
  return static_cast<int>((child.ix & 1) | ((child.iy & 1) << 1) | ((child.iz & 1) << 2));
}

}  // namespace

bool cube_intersects_ball(const Vec3& cube_min, double size, const Vec3& center, double radius) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double lo = cube_min[a];
    const double hi = cube_min[a] + size;
    const double c = center[a];
    if (c < lo) {
      d2 += (lo - c) * (lo - c);
    } else if (c > hi) {
      d2 += (c - hi) * (c - hi);
    }
  }
  return d2 <= radius * radius;
}

VoxelMap VoxelMap::build(std::vector<Vec3> points, double root_size, double leaf_size, const Vec3& origin) {
  if (!(root_size > 0.0) || !(leaf_size > 0.0)) throw InvalidSizes("voxel sizes must be positive");
  const double ratio = root_size / leaf_size;
  const double log_ratio = std::log2(ratio);
  const int depth = static_cast<int>(std::lround(log_ratio));
  if (ratio < 1.0 || depth > 30 || std::ldexp(leaf_size, depth) != root_size) {
    throw InvalidSizes("root_size / leaf_size must be an exact power of two, got " + std::to_string(ratio));
  }

  VoxelMap map;
  map.origin_ = origin;
  map.root_size_ = root_size;
  map.leaf_size_ = leaf_size;
  map.depth_ = depth;
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const VoxelKey leaf = map.leaf_key_of(points[i]);
    auto [it, inserted] = map.nodes_.try_emplace(leaf);
    it->second.points.push_back(i);
    if (!inserted) continue;
    ++map.num_leaves_;
    VoxelKey k = leaf;
    while (k.level > 0) {
      const VoxelKey p = k.parent();
      auto [pit, pnew] = map.nodes_.try_emplace(p);
      pit->second.child_mask |= static_cast<std::uint8_t>(1u << octant_of(k));
      if (!pnew) break;
      if (p.level == 0) ++map.num_roots_;
      k = p;
    }
    if (depth == 0 && inserted) ++map.num_roots_;
  }
  map.points_ = std::make_shared<const std::vector<Vec3>>(std::move(points));
  return map;
}

Vec3 VoxelMap::cube_min(const VoxelKey& k) const {
  const double s = size_at(k.level);
  return origin_ + Vec3(static_cast<double>(k.ix) * s, static_cast<double>(k.iy) * s, static_cast<double>(k.iz) * s);
}

Vec3 VoxelMap::center(const VoxelKey& k) const {
  const double s = size_at(k.level);
  return origin_ + Vec3((static_cast<double>(k.ix) + 0.5) * s, (static_cast<double>(k.iy) + 0.5) * s,
                        (static_cast<double>(k.iz) + 0.5) * s);
}

VoxelKey VoxelMap::leaf_key_of(const Vec3& p) const {
  const Vec3 q = (p - origin_) / leaf_size_;
  return {depth_, static_cast<std::int64_t>(std::floor(q.x())), static_cast<std::int64_t>(std::floor(q.y())),
          static_cast<std::int64_t>(std::floor(q.z()))};
}

std::optional<VoxelKey> VoxelMap::leaf_of(const Vec3& p) const {
  if (!p.allFinite()) return std::nullopt;
  const Vec3 q = (p - origin_) / leaf_size_;
  if (q.cwiseAbs().maxCoeff() > 4e18) return std::nullopt;
  const VoxelKey k = leaf_key_of(p);
  if (!contains(k)) return std::nullopt;
  return k;
}

const VoxelMap::Node* VoxelMap::node(const VoxelKey& k) const {
  auto it = nodes_.find(k);
  return it == nodes_.end() ? nullptr : &it->second;
}

const std::vector<std::uint32_t>& VoxelMap::leaf_points(const VoxelKey& k) const {
  if (k.level != depth_) return kNoPoints;
  auto it = nodes_.find(k);
  return it == nodes_.end() ? kNoPoints : it->second.points;
}

std::vector<VoxelKey> VoxelMap::children(const VoxelKey& k) const {
  std::vector<VoxelKey> out;
  const Node* n = node(k);
  if (!n || k.level >= depth_) return out;
  for (int o = 0; o < 8; ++o) {
    if (n->child_mask & (1u << o)) out.push_back(k.child(o));
  }
  return out;
}

std::vector<VoxelKey> VoxelMap::roots() const {
  std::vector<VoxelKey> out;
  out.reserve(num_roots_);
  for (const auto& [k, n] : nodes_) {
    if (k.level == 0) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VoxelKey> VoxelMap::leaves() const {
  std::vector<VoxelKey> out;
  out.reserve(num_leaves_);
  for (const auto& [k, n] : nodes_) {
    if (k.level == depth_) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VoxelKey> VoxelMap::leaves_under(const VoxelKey& k) const {
  std::vector<VoxelKey> out;
  std::vector<VoxelKey> stack{k};
  while (!stack.empty()) {
    const VoxelKey cur = stack.back();
    stack.pop_back();
    if (!contains(cur)) continue;
    if (cur.level == depth_) {
      out.push_back(cur);
      continue;
    }
    for (const auto& c : children(cur)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VoxelKey> VoxelMap::leaves_within(const Vec3& c, double radius) const {
  std::vector<VoxelKey> out;
  if (!(radius > 0.0) || nodes_.empty()) return out;
  // Candidate roots: lattice range covering the ball.
  const Vec3 lo = (c - origin_).array() - radius;
  const Vec3 hi = (c - origin_).array() + radius;
  std::vector<VoxelKey> stack;
  const double span = ((hi - lo) / root_size_).prod();
  if (span < static_cast<double>(num_roots_)) {
    for (auto x = static_cast<std::int64_t>(std::floor(lo.x() / root_size_)); x <= static_cast<std::int64_t>(std::floor(hi.x() / root_size_)); ++x) {
      for (auto y = static_cast<std::int64_t>(std::floor(lo.y() / root_size_)); y <= static_cast<std::int64_t>(std::floor(hi.y() / root_size_)); ++y) {
        for (auto z = static_cast<std::int64_t>(std::floor(lo.z() / root_size_)); z <= static_cast<std::int64_t>(std::floor(hi.z() / root_size_)); ++z) {
          const VoxelKey r{0, x, y, z};
          if (contains(r)) stack.push_back(r);
        }
      }
    }
  } else {
    stack = roots();
  }
  while (!stack.empty()) {
    const VoxelKey k = stack.back();
    stack.pop_back();
    if (!cube_intersects_ball(cube_min(k), size_at(k.level), c, radius)) continue;
    if (k.level == depth_) {
      out.push_back(k);
      continue;
    }
    for (const auto& ch : children(k)) stack.push_back(ch);
  }
  std::sort(out.begin(), out.end());
  return out;
}

VoxelMap VoxelMap::prune(const std::function<bool(const VoxelKey&)>& keep) const {
  VoxelMap out;
  out.origin_ = origin_;
  out.root_size_ = root_size_;
  out.leaf_size_ = leaf_size_;
  out.depth_ = depth_;
  out.points_ = points_;
  for (const auto& [k, n] : nodes_) {
    if (k.level != depth_ || !keep(k)) continue;
    out.nodes_.emplace(k, n);
    ++out.num_leaves_;
    VoxelKey cur = k;
    while (cur.level > 0) {
      const VoxelKey p = cur.parent();
      auto [pit, pnew] = out.nodes_.try_emplace(p);
      pit->second.child_mask |= static_cast<std::uint8_t>(1u << octant_of(cur));
      if (!pnew) break;
      if (p.level == 0) ++out.num_roots_;
      cur = p;
    }
    if (depth_ == 0) ++out.num_roots_;
  }
  return out;
}

const std::vector<Vec3>& VoxelMap::points() const { return points_ ? *points_ : kNoCloud; }

}  // namespace edgereg
