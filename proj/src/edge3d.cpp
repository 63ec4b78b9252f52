#include "edgereg/edge3d.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "edgereg/errors.hpp"

namespace edgereg {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 orient(const Vec3& n, const Vec3& centroid, const std::optional<Vec3>& viewpoint) {
  if (viewpoint) {
    const double s = n.dot(*viewpoint - centroid);
    if (s != 0.0) return s > 0.0 ? n : Vec3(-n);
  }
  for (int i : {2, 0, 1}) {
    if (std::abs(n[i]) > 1e-12) return n[i] > 0.0 ? n : Vec3(-n);
  }
  return n;
}

// Edges are orientation-free; fix the sign so the first significant component is positive.
Vec3 canonical_dir(const Vec3& d) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) > 1e-9) return d[i] > 0.0 ? d : Vec3(-d);
  }
  return d;
}

Edge3D make_edge(const Vec3& p0, const Vec3& n0, const Vec3& n1, double t0, double t1) {
  Edge3D e;
  e.normals = {n0, n1};
  const Vec3 d = n0.cross(n1).normalized();
  e.direction = canonical_dir(d);
  e.a = p0 + t0 * d;
  e.b = p0 + t1 * d;
  if (e.direction.dot(d) < 0.0) std::swap(e.a, e.b);
  return e;
}

// Slab clip of p + t d against [lo, hi]; returns false if empty.
bool clip_box(const Vec3& p, const Vec3& d, const Vec3& lo, const Vec3& hi, double& t0, double& t1) {
  t0 = -std::numeric_limits<double>::infinity();
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (p[a] < lo[a] || p[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - p[a]) / d[a], tb = (hi[a] - p[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 <= t1;
}

void pool_points(const VoxelMap& map, const VoxelKey& k, const VoxelKeySet& roi_leaves, std::vector<Vec3>& out) {
  for (const auto& leaf : map.leaves_under(k)) {
    if (!roi_leaves.count(leaf)) continue;
    for (auto i : map.leaf_points(leaf)) out.push_back(map.point(i));
  }
}

void descend(const VoxelMap& map, const VoxelKey& k, const VoxelKeySet& roi_leaves, const VoxelKeySet& roi_nodes,
             const Edge3dConfig& cfg, std::vector<PlanePatch>& out) {
  std::vector<Vec3> pts;
  pool_points(map, k, roi_leaves, pts);
  if (static_cast<int>(pts.size()) < cfg.min_points) return;
  if (auto p = plane_test(pts, cfg)) {
    p->key = k;
    p->cube_min = map.cube_min(k);
    p->cube_size = map.size_at(k.level);
    out.push_back(*p);
    return;
  }
  if (k.level == map.depth()) return;
  for (const auto& c : map.children(k)) {
    if (roi_nodes.count(c)) descend(map, c, roi_leaves, roi_nodes, cfg, out);
  }
}

// Occupied ROI leaves that may hold points within `radius` of segment a-b, sorted.
std::vector<VoxelKey> capsule_leaves(const VoxelMap& map, const Vec3& a, const Vec3& b, double radius,
                                     const VoxelKeySet& roi_leaves) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / radius)));
  // any point within `radius` of the segment lies within 1.2 * radius of a sample
  VoxelKeySet seen;
  std::vector<VoxelKey> out;
  for (int i = 0; i <= steps; ++i) {
    const Vec3 q = a + (b - a) * (static_cast<double>(i) / steps);
    for (const auto& k : map.leaves_within(q, 1.2 * radius)) {
      if (roi_leaves.count(k) && seen.insert(k).second) out.push_back(k);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double plane_band(const PlanePatch& p, double leaf) {
  return std::max(3.0 * std::sqrt(std::max(p.eigvals[0], 0.0)), 0.25 * leaf);
}

// Trim a candidate to the longest stretch backed by points of both planes.
std::optional<Edge3D> trim_to_support(const Edge3D& cand, const PlanePatch& pa, const PlanePatch& pb,
                                      const VoxelMap& map, const VoxelKeySet& roi_leaves, const Edge3dConfig& cfg) {
  const double leaf = map.leaf_size();
  const Vec3 d = cand.direction;
  const Vec3 p0 = cand.a;
  const double len = cand.length();
  const int nbins = std::max(1, static_cast<int>(std::ceil(len / leaf)));
  std::vector<char> sa(nbins, 0), sb(nbins, 0);
  std::vector<double> tmin_a(nbins, 1e300), tmax_a(nbins, -1e300);
  std::vector<double> tmin_b(nbins, 1e300), tmax_b(nbins, -1e300);
  const double lateral = 2.0 * leaf;
  const double da = plane_band(pa, leaf), db = plane_band(pb, leaf);
  for (const auto& k : capsule_leaves(map, cand.a, cand.b, lateral, roi_leaves)) {
    for (auto i : map.leaf_points(k)) {
      const Vec3& q = map.point(i);
      const Vec3 v = q - p0;
      const double t = v.dot(d);
      if (t < 0.0 || t > len) continue;
      if ((v - t * d).norm() > lateral) continue;
      const double ea = std::abs(pa.normal.dot(q - pa.centroid));
      const double eb = std::abs(pb.normal.dot(q - pb.centroid));
      const int bin = std::min(nbins - 1, static_cast<int>(t / leaf));
      if (ea < da && eb >= db) {
        sa[bin] = 1;
        tmin_a[bin] = std::min(tmin_a[bin], t);
        tmax_a[bin] = std::max(tmax_a[bin], t);
      } else if (eb < db && ea >= da) {
        sb[bin] = 1;
        tmin_b[bin] = std::min(tmin_b[bin], t);
        tmax_b[bin] = std::max(tmax_b[bin], t);
      }
    }
  }
  // longest run of supported bins, bridging single-bin gaps
  int best_s = -1, best_e = -1, cur_s = -1, last = -1;
  for (int i = 0; i < nbins; ++i) {
    if (!(sa[i] && sb[i])) continue;
    if (cur_s < 0 || i - last > 2) cur_s = i;
    last = i;
    if (best_s < 0 || last - cur_s > best_e - best_s) {
      best_s = cur_s;
      best_e = last;
    }
  }
  if (best_s < 0) return std::nullopt;
  const double t0 = std::max(tmin_a[best_s], tmin_b[best_s]);
  const double t1 = std::min(tmax_a[best_e], tmax_b[best_e]);
  if (t1 - t0 < cfg.min_edge_len) return std::nullopt;
  Edge3D e = cand;
  e.a = p0 + t0 * d;
  e.b = p0 + t1 * d;
  return e;
}

bool edge_less(const Edge3D& x, const Edge3D& y) {
  for (int i = 0; i < 3; ++i) {
    if (x.a[i] != y.a[i]) return x.a[i] < y.a[i];
  }
  for (int i = 0; i < 3; ++i) {
    if (x.b[i] != y.b[i]) return x.b[i] < y.b[i];
  }
  return false;
}

// Drop segments that mostly overlap a longer, nearly parallel segment lying within `gap` of it.
std::vector<Edge3D> dedup(std::vector<Edge3D> edges, double max_angle_deg, double gap) {
  std::stable_sort(edges.begin(), edges.end(), [](const Edge3D& x, const Edge3D& y) { return x.length() > y.length(); });
  const double cos_tol = std::cos(max_angle_deg * kDeg);
  std::vector<Edge3D> kept;
  for (const auto& e : edges) {
    bool dup = false;
    for (const auto& k : kept) {
      if (std::abs(e.direction.dot(k.direction)) < cos_tol) continue;
      auto lat = [&](const Vec3& q) {
        const Vec3 v = q - k.a;
        return (v - v.dot(k.direction) * k.direction).norm();
      };
      if (lat(e.a) >= gap || lat(e.b) >= gap) continue;
      const double ta = (e.a - k.a).dot(k.direction), tb = (e.b - k.a).dot(k.direction);
      const double lo = std::max(std::min(ta, tb), 0.0), hi = std::min(std::max(ta, tb), k.length());
      if (hi - lo >= 0.5 * std::abs(tb - ta)) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end(), edge_less);
  return kept;
}

// Refit both planes from all points near the segment and re-intersect; endpoints are
// projected onto the new line.
Edge3D refit_edge(const Edge3D& e, const VoxelMap& map, const VoxelKeySet& roi_leaves, double radius) {
  const double leaf = map.leaf_size();
  const double band = 0.25 * leaf;
  Edge3D cur = e;
  for (int pass = 0; pass < 2; ++pass) {
    const Vec3 d = cur.direction;
    const Vec3 p0 = cur.a;
    const double len = cur.length();
    std::array<std::vector<Vec3>, 2> side;
    for (const auto& k : capsule_leaves(map, cur.a, cur.b, radius, roi_leaves)) {
      for (auto i : map.leaf_points(k)) {
        const Vec3& q = map.point(i);
        const Vec3 v = q - p0;
        const double t = v.dot(d);
        if (t < 0.0 || t > len || (v - t * d).norm() > radius) continue;
        const double e0 = std::abs(cur.normals[0].dot(v)), e1 = std::abs(cur.normals[1].dot(v));
        if (e0 < band && e1 >= band) side[0].push_back(q);
        else if (e1 < band && e0 >= band) side[1].push_back(q);
      }
    }
    if (side[0].size() < 3 || side[1].size() < 3) return cur;
    std::array<Vec3, 2> c, n;
    for (int s = 0; s < 2; ++s) {
      c[s] = Vec3::Zero();
      for (const auto& q : side[s]) c[s] += q;
      c[s] /= static_cast<double>(side[s].size());
      Mat3 cov = Mat3::Zero();
      for (const auto& q : side[s]) cov.noalias() += (q - c[s]) * (q - c[s]).transpose();
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
      n[s] = es.eigenvectors().col(0).normalized();
      if (n[s].dot(cur.normals[s]) < 0.0) n[s] = -n[s];
    }
    const Vec3 cr = n[0].cross(n[1]);
    if (cr.norm() < 1e-6) return cur;
    Eigen::Matrix<double, 2, 3> a;
    a.row(0) = n[0].transpose();
    a.row(1) = n[1].transpose();
    const Vec3 ref = 0.5 * (cur.a + cur.b);
    const Eigen::Vector2d rhs(n[0].dot(c[0] - ref), n[1].dot(c[1] - ref));
    const Vec3 lp = ref + a.transpose() * (a * a.transpose()).ldlt().solve(rhs);
    const Vec3 nd = canonical_dir(cr.normalized());
    Edge3D next = cur;
    next.normals = {n[0], n[1]};
    next.direction = nd;
    next.a = lp + (cur.a - lp).dot(nd) * nd;
    next.b = lp + (cur.b - lp).dot(nd) * nd;
    if ((next.b - next.a).dot(nd) < 0.0) std::swap(next.a, next.b);
    cur = next;
  }
  return cur;
}

}  // namespace

void Edge3dConfig::validate() const {
  if (!(planarity_ratio > 0.0 && planarity_ratio < 1.0)) throw ConfigError("edge3d: planarity_ratio must be in (0,1)");
  if (min_points < 3) throw ConfigError("edge3d: min_points must be >= 3");
  if (!(angle_min_deg > 0.0 && angle_min_deg < angle_max_deg && angle_max_deg < 180.0))
    throw ConfigError("edge3d: need 0 < angle_min < angle_max < 180");
  if (!(min_edge_len >= 0.0)) throw ConfigError("edge3d: min_edge_len must be >= 0");
  if (!(merge_angle_deg >= 0.0)) throw ConfigError("edge3d: merge_angle_deg must be >= 0");
}

std::optional<PlanePatch> plane_test(std::span<const Vec3> points, const Edge3dConfig& cfg) {
  const std::size_t m = points.size();
  if (static_cast<long>(m) < cfg.min_points || m < 3) return std::nullopt;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(m);
  Mat3 k = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 q = p - mean;
    k.noalias() += q * q.transpose();
  }
  k /= static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Mat3> es(k);
  const Vec3 ev = es.eigenvalues().cwiseMax(0.0);
  if (!(ev[1] > 0.0)) return std::nullopt;
  if (ev[0] / ev[1] > cfg.planarity_ratio) return std::nullopt;
  if (cfg.max_lambda0 > 0.0 && ev[0] > cfg.max_lambda0) return std::nullopt;
  PlanePatch p;
  p.centroid = mean;
  p.normal = orient(es.eigenvectors().col(0).normalized(), mean, cfg.viewpoint);
  p.eigvals = ev;
  p.m = m;
  return p;
}

std::vector<PlanePatch> extract_planes(const VoxelMap& map, const RoiResult& roi, const Edge3dConfig& cfg) {
  std::vector<PlanePatch> out;
  if (roi.visible_keys.empty()) return out;
  VoxelKeySet roi_leaves(roi.visible_keys.begin(), roi.visible_keys.end());
  VoxelKeySet roi_nodes;
  std::vector<VoxelKey> roots;
  for (const auto& k : roi.visible_keys) {
    for (int l = k.level; l >= 0; --l) {
      if (!roi_nodes.insert(k.ancestor(l)).second) break;
      if (l == 0) roots.push_back(k.ancestor(0));
    }
  }
  std::sort(roots.begin(), roots.end());
  for (const auto& r : roots) descend(map, r, roi_leaves, roi_nodes, cfg, out);
  std::sort(out.begin(), out.end(), [](const PlanePatch& a, const PlanePatch& b) { return a.key < b.key; });
  return out;
}

bool cubes_touch(const PlanePatch& a, const PlanePatch& b, double eps) {
  for (int i = 0; i < 3; ++i) {
    if (a.cube_min[i] > b.cube_min[i] + b.cube_size + eps) return false;
    if (b.cube_min[i] > a.cube_min[i] + a.cube_size + eps) return false;
  }
  return true;
}

std::optional<Edge3D> intersect_planes(const PlanePatch& pa, const PlanePatch& pb, const Edge3dConfig& cfg,
                                       double inflate) {
  const double c = std::clamp(pa.normal.dot(pb.normal), -1.0, 1.0);
  const double angle = std::acos(c) / kDeg;
  if (angle < cfg.angle_min_deg || angle > cfg.angle_max_deg) return std::nullopt;
  const Vec3 cr = pa.normal.cross(pb.normal);
  if (cr.norm() < 1e-12) return std::nullopt;

  // minimum-norm solution of the 2x3 system relative to the centroids' midpoint
  Eigen::Matrix<double, 2, 3> a;
  a.row(0) = pa.normal.transpose();
  a.row(1) = pb.normal.transpose();
  const Vec3 ref = 0.5 * (pa.centroid + pb.centroid);
  const Eigen::Vector2d rhs(pa.normal.dot(pa.centroid - ref), pb.normal.dot(pb.centroid - ref));
  const Eigen::Matrix2d aat = a * a.transpose();
  const Vec3 p0 = ref + a.transpose() * aat.ldlt().solve(rhs);
  const Vec3 d = cr.normalized();

  if (inflate < 0.0) inflate = std::max(pa.cube_size, pb.cube_size);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const PlanePatch* p : {&pa, &pb}) {
    const Vec3 bl = p->cube_min - Vec3::Constant(inflate);
    const Vec3 bh = p->cube_min + Vec3::Constant(p->cube_size + inflate);
    double t0, t1;
    if (clip_box(p0, d, bl, bh, t0, t1)) {
      lo = std::min(lo, t0);
      hi = std::max(hi, t1);
    }
  }
  if (!(hi - lo >= cfg.min_edge_len) || !std::isfinite(hi - lo)) return std::nullopt;
  return make_edge(p0, pa.normal, pb.normal, lo, hi);
}

std::vector<Edge3D> merge_collinear(std::vector<Edge3D> edges, const Edge3dConfig& cfg, double gap) {
  const double cos_tol = std::cos(cfg.merge_angle_deg * kDeg);
  for (;;) {
    const std::size_t n = edges.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    bool merged_any = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const Edge3D& x = edges[i];
        const Edge3D& y = edges[j];
        if (std::abs(x.direction.dot(y.direction)) < cos_tol) continue;
        auto lat = [](const Edge3D& e, const Vec3& q) {
          const Vec3 v = q - e.a;
          return (v - v.dot(e.direction) * e.direction).norm();
        };
        if (std::max(lat(x, y.a), lat(x, y.b)) >= gap && std::max(lat(y, x.a), lat(y, x.b)) >= gap) continue;
        const double ya = (y.a - x.a).dot(x.direction), yb = (y.b - x.a).dot(x.direction);
        const double ylo = std::min(ya, yb), yhi = std::max(ya, yb);
        const double xlen = x.length();
        if (ylo > xlen + gap || yhi < -gap) continue;
        const auto ri = find(i), rj = find(j);
        if (ri != rj) {
          parent[std::max(ri, rj)] = std::min(ri, rj);
          merged_any = true;
        }
      }
    }
    if (!merged_any) break;
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
    std::vector<Edge3D> next;
    for (const auto& [root, members] : groups) {
      if (members.size() == 1) {
        next.push_back(edges[members[0]]);
        continue;
      }
      const std::size_t longest = *std::max_element(members.begin(), members.end(), [&](std::size_t u, std::size_t v) {
        return edges[u].length() < edges[v].length();
      });
      const Edge3D& ref = edges[longest];
      const Vec3 p0 = 0.5 * (ref.a + ref.b);
      const Vec3 d = ref.direction;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (auto m : members) {
        for (const Vec3& q : {edges[m].a, edges[m].b}) {
          const double t = (q - p0).dot(d);
          lo = std::min(lo, t);
          hi = std::max(hi, t);
        }
      }
      Edge3D e = ref;
      e.a = p0 + lo * d;
      e.b = p0 + hi * d;
      next.push_back(e);
    }
    edges = std::move(next);
  }
  std::sort(edges.begin(), edges.end(), edge_less);
  return edges;
}

std::vector<Edge3D> extract_edges3d(const VoxelMap& map, const RoiResult& roi, const Edge3dConfig& cfg) {
  cfg.validate();
  const auto patches = extract_planes(map, roi, cfg);
  if (patches.size() < 2) return {};
  VoxelKeySet roi_leaves(roi.visible_keys.begin(), roi.visible_keys.end());

  // bucket patches by root so adjacency only scans neighbouring roots
  std::map<VoxelKey, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < patches.size(); ++i) by_root[patches[i].key.ancestor(0)].push_back(i);

  std::vector<Edge3D> segments;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const VoxelKey r = patches[i].key.ancestor(0);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = by_root.find(VoxelKey{0, r.ix + dx, r.iy + dy, r.iz + dz});
          if (it == by_root.end()) continue;
          for (auto j : it->second) {
            if (j <= i || !cubes_touch(patches[i], patches[j])) continue;
            const auto cand = intersect_planes(patches[i], patches[j], cfg);
            if (!cand) continue;
            if (auto e = trim_to_support(*cand, patches[i], patches[j], map, roi_leaves, cfg)) segments.push_back(*e);
          }
        }
  }
  auto merged = merge_collinear(std::move(segments), cfg, map.leaf_size());
  std::erase_if(merged, [&](const Edge3D& e) { return e.length() < cfg.min_edge_len; });
  auto kept = dedup(std::move(merged), cfg.dedup_angle_deg, map.leaf_size());
  for (auto& e : kept) e = refit_edge(e, map, roi_leaves, 4.0 * map.leaf_size());
  std::sort(kept.begin(), kept.end(), edge_less);
  return kept;
}

}  // namespace edgereg
