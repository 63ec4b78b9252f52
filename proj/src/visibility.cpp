#include "edgereg/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "edgereg/convex_hull.hpp"
#include "edgereg/errors.hpp"

namespace edgereg {

std::vector<Vec3> ghpr_transform(std::span<const Vec3> points, const Vec3& center, double phi) {
  const double radius = 0.5 * phi;
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Vec3 q = p - center;
    const double d = q.norm();
    if (d == 0.0) throw PointAtCenter("ghpr_transform: point coincides with the viewpoint");
    if (d > phi) throw PhiTooSmall("ghpr_transform: phi must be >= max distance to the viewpoint");
    out.push_back(center + q + 2.0 * (radius - d) * q / d);
  }
  return out;
}

std::vector<std::uint32_t> visible_points(std::span<const Vec3> points, const Vec3& center, double phi,
                                          double tol_rel) {
  std::vector<Vec3> flipped = ghpr_transform(points, center, phi);
  flipped.push_back(center);
  const HullMembership hull = hull_membership(flipped, tol_rel);
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    if (hull.on_hull[i]) out.push_back(i);
  }
  return out;
}

bool RoiResult::contains(const VoxelKey& k) const {
  return std::binary_search(visible_keys.begin(), visible_keys.end(), k);
}

bool in_widened_frustum(const CameraIntrinsics& intr, const Vec3& p, double widen) {
  if (!(p.z() > 0.0)) return false;
  constexpr double kMaxHalf = 89.0 * std::numbers::pi / 180.0;
  auto half = [&](double extent, double f) { return std::tan(std::min(std::atan(extent / f) * widen, kMaxHalf)); };
  const double x = p.x() / p.z();
  const double y = p.y() / p.z();
  return x >= -half(intr.cx, intr.fx) && x <= half(intr.width - intr.cx, intr.fx) && y >= -half(intr.cy, intr.fy) &&
         y <= half(intr.height - intr.cy, intr.fy);
}

namespace {

void gather_points(const VoxelMap& map, RoiResult& r) {
  for (const auto& k : r.visible_keys) {
    const auto& idx = map.leaf_points(k);
    r.point_indices.insert(r.point_indices.end(), idx.begin(), idx.end());
  }
  std::sort(r.point_indices.begin(), r.point_indices.end());
}

}  // namespace

RoiResult select_roi(const VoxelMap& map, const Viewpoint& vp) {
  if (!(vp.fov_widen >= 1.0)) throw InvalidArgument("select_roi: fov_widen must be >= 1");
  if (!(vp.max_dist > 0.0)) throw InvalidArgument("select_roi: max_dist must be > 0");
  if (!(vp.phi_scale >= 1.0)) throw InvalidArgument("select_roi: phi_scale must be >= 1");
  RoiResult r;
  const Vec3 c = vp.pose.center();

  std::vector<Vec3> centers;
  std::vector<VoxelKey> hull_input;
  for (const auto& k : map.leaves_within(c, vp.max_dist)) {
    const Vec3 ctr = map.center(k);
    const double d = (ctr - c).norm();
    if (d > vp.max_dist) continue;
    if (d == 0.0) {
      r.candidate_keys.push_back(k);
      r.hull_keys.push_back(k);
      continue;
    }
    if (!(vp.pose.apply(ctr).z() > 0.0)) continue;
    hull_input.push_back(k);
    centers.push_back(ctr);
  }

  if (!centers.empty()) {
    const auto vis = visible_points(centers, c, vp.phi_scale * vp.max_dist);
    std::vector<char> on(centers.size(), 0);
    for (auto i : vis) on[i] = 1;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (!in_widened_frustum(vp.intrinsics, vp.pose.apply(centers[i]), vp.fov_widen)) continue;
      r.candidate_keys.push_back(hull_input[i]);
      if (on[i]) r.hull_keys.push_back(hull_input[i]);
    }
  }
  std::sort(r.candidate_keys.begin(), r.candidate_keys.end());
  std::sort(r.hull_keys.begin(), r.hull_keys.end());

  VoxelKeySet visible(r.hull_keys.begin(), r.hull_keys.end());
  std::vector<VoxelKey> frontier = r.hull_keys;
  for (int ring = 0; ring < vp.dilation; ++ring) {
    std::vector<VoxelKey> next;
    for (const auto& k : frontier) {
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            const VoxelKey nk{k.level, k.ix + dx, k.iy + dy, k.iz + dz};
            if (map.is_leaf(nk) && visible.insert(nk).second) next.push_back(nk);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  r.visible_keys.assign(visible.begin(), visible.end());
  std::sort(r.visible_keys.begin(), r.visible_keys.end());
  r.empty_roi = r.visible_keys.empty();
  gather_points(map, r);
  return r;
}

RoiResult full_roi(const VoxelMap& map) {
  RoiResult r;
  r.visible_keys = map.leaves();
  r.hull_keys = r.visible_keys;
  r.candidate_keys = r.visible_keys;
  r.empty_roi = r.visible_keys.empty();
  gather_points(map, r);
  return r;
}

}  // namespace edgereg
