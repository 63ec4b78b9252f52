#include "edgereg/dynamic_removal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "edgereg/errors.hpp"

namespace edgereg {

std::vector<VoxelKey> voxels_on_ray(const Vec3& origin, const Vec3& endpoint, double voxel_size, int key_level) {
  std::vector<VoxelKey> out;
  const Vec3 d = endpoint - origin;
  if (d.squaredNorm() == 0.0) return out;

  std::int64_t cur[3], last[3], step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    cur[a] = static_cast<std::int64_t>(std::floor(origin[a] / voxel_size));
    last[a] = static_cast<std::int64_t>(std::floor(endpoint[a] / voxel_size));
    if (d[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((static_cast<double>(cur[a]) + 1.0) * voxel_size - origin[a]) / d[a];
      t_delta[a] = voxel_size / d[a];
    } else if (d[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (static_cast<double>(cur[a]) * voxel_size - origin[a]) / d[a];
      t_delta[a] = -voxel_size / d[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  constexpr double kTie = 1e-10;
  const std::int64_t max_steps =
      std::abs(last[0] - cur[0]) + std::abs(last[1] - cur[1]) + std::abs(last[2] - cur[2]) + 3;
  for (std::int64_t n = 0; n <= max_steps; ++n) {
    if (cur[0] == last[0] && cur[1] == last[1] && cur[2] == last[2]) break;
    out.push_back({key_level, cur[0], cur[1], cur[2]});
    const double t = std::min({t_max[0], t_max[1], t_max[2]});
    if (t > 1.0) break;
    for (int a = 0; a < 3; ++a) {
      if (step[a] != 0 && t_max[a] <= t + kTie) {
        cur[a] += step[a];
        t_max[a] += t_delta[a];
      }
    }
  }
  return out;
}

double safe_stop_distance(double voxel_size, double incidence_margin, double cos_incidence) {
  return voxel_size * (1.0 + incidence_margin / std::max(std::abs(cos_incidence), 0.1));
}

bool RemovalResult::keep(const VoxelKey& k) const {
  return !std::binary_search(removed_keys.begin(), removed_keys.end(), k);
}

namespace {

struct Cell {
  std::vector<int> hit_ids;  // sorted, unique
  std::vector<int> seen_ids;
  std::vector<std::uint32_t> points;
  bool normal_done = false;
  bool has_normal = false;
  Vec3 normal = Vec3::Zero();
};

void insert_sorted(std::vector<int>& v, int id) {
  auto it = std::lower_bound(v.begin(), v.end(), id);
  if (it == v.end() || *it != id) v.insert(it, id);
}

}  // namespace

RemovalResult remove_dynamic(const std::vector<ScanRecord>& scans, const RemovalParams& params) {
  if (scans.empty()) throw EmptyInput("remove_dynamic: no scans");
  if (!(params.voxel_size > 0.0)) throw InvalidArgument("remove_dynamic: voxel_size must be > 0");
  if (params.min_scans_seen_through < 1) throw InvalidArgument("remove_dynamic: min_scans_seen_through must be >= 1");
  if (!(params.incidence_margin >= 0.0)) throw InvalidArgument("remove_dynamic: incidence_margin must be >= 0");

  RemovalResult result;
  for (const auto& s : scans) {
    for (const auto& p : s.points) {
      result.merged.points.push_back(p);
      result.merged.scan_id.push_back(s.scan_id);
    }
  }

  const double vs = params.voxel_size;
  auto key_of = [&](const Vec3& p) {
    return VoxelKey{params.key_level, static_cast<std::int64_t>(std::floor(p.x() / vs)),
                    static_cast<std::int64_t>(std::floor(p.y() / vs)), static_cast<std::int64_t>(std::floor(p.z() / vs))};
  };

  std::unordered_map<VoxelKey, Cell, VoxelKeyHash> cells;
  std::vector<VoxelKey> point_keys(result.merged.size());
  for (std::uint32_t i = 0; i < result.merged.size(); ++i) {
    point_keys[i] = key_of(result.merged.points[i]);
    Cell& c = cells[point_keys[i]];
    insert_sorted(c.hit_ids, result.merged.scan_id[i]);
    c.points.push_back(i);
  }

  auto normal_of = [&](Cell& c) -> const Vec3* {
    if (!c.normal_done) {
      c.normal_done = true;
      if (c.points.size() >= 5) {
        Vec3 mean = Vec3::Zero();
        for (auto i : c.points) mean += result.merged.points[i];
        mean /= static_cast<double>(c.points.size());
        Mat3 cov = Mat3::Zero();
        for (auto i : c.points) {
          const Vec3 q = result.merged.points[i] - mean;
          cov += q * q.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        c.normal = es.eigenvectors().col(0);
        c.has_normal = true;
      }
    }
    return c.has_normal ? &c.normal : nullptr;
  };

  for (const auto& s : scans) {
    for (const auto& p : s.points) {
      const Vec3 d = p - s.origin;
      const double len = d.norm();
      if (!(len > 0.0)) continue;
      const Vec3 dir = d / len;
      double cos_inc = 1.0;
      if (auto it = cells.find(key_of(p)); it != cells.end()) {
        if (const Vec3* n = normal_of(it->second)) cos_inc = std::abs(dir.dot(*n));
      }
      const double stop = safe_stop_distance(vs, params.incidence_margin, cos_inc);
      if (len <= stop) continue;
      const Vec3 end = s.origin + dir * (len - stop);
      for (const auto& k : voxels_on_ray(s.origin, end, vs, params.key_level)) {
        auto it = cells.find(k);
        if (it == cells.end()) continue;
        Cell& c = it->second;
        // A scan never marks voxels it hits itself.
        if (std::binary_search(c.hit_ids.begin(), c.hit_ids.end(), s.scan_id)) continue;
        if (c.seen_ids.empty() || c.seen_ids.back() != s.scan_id) c.seen_ids.push_back(s.scan_id);
      }
    }
  }

  for (auto& [k, c] : cells) {
    std::sort(c.seen_ids.begin(), c.seen_ids.end());
    c.seen_ids.erase(std::unique(c.seen_ids.begin(), c.seen_ids.end()), c.seen_ids.end());
    if (!c.hit_ids.empty() && static_cast<int>(c.seen_ids.size()) >= params.min_scans_seen_through) {
      result.removed_keys.push_back(k);
    }
  }
  std::sort(result.removed_keys.begin(), result.removed_keys.end());

  std::vector<std::uint32_t> removed;
  for (std::uint32_t i = 0; i < result.merged.size(); ++i) {
    if (result.keep(point_keys[i])) {
      result.static_indices.push_back(i);
    } else {
      removed.push_back(i);
    }
  }
  result.static_cloud = result.merged.subset(result.static_indices);
  result.removed_cloud = result.merged.subset(removed);
  return result;
}

}  // namespace edgereg
