#include "edgereg/convex_hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace edgereg {

namespace {

struct Face {
  std::array<int, 3> v{};
  std::array<int, 3> nb{-1, -1, -1};  // neighbour across edge v[i] -> v[(i+1)%3]
  Vec3 n = Vec3::Zero();
  double off = 0.0;
  bool alive = true;
  std::vector<int> outside;
  int far = -1;
  double far_dist = 0.0;

  double dist(const Vec3& p) const { return n.dot(p) - off; }
};

class QuickHull {
 public:
  QuickHull(std::span<const Vec3> pts, double tol) : pts_(pts), tol_(tol) {}

  // Returns false when the initial simplex is degenerate (coplanar input).
  bool run(const std::array<int, 4>& simplex) {
    build_simplex(simplex);
    std::vector<char> used(pts_.size(), 0);
    for (int s : simplex) used[s] = 1;
    near_.assign(pts_.size(), 0);
    for (int i = 0; i < static_cast<int>(pts_.size()); ++i) {
      if (!used[i]) assign(i, {0, 1, 2, 3});
    }

    for (std::size_t cursor = 0; cursor < faces_.size(); ++cursor) {
      while (faces_[cursor].alive && !faces_[cursor].outside.empty()) add_point(static_cast<int>(cursor));
    }
    return true;
  }

  HullMembership membership() const {
    HullMembership out;
    out.on_hull.assign(pts_.size(), 0);
    std::vector<int> alive;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      if (!faces_[f].alive) continue;
      alive.push_back(f);
      out.faces.push_back(faces_[f].v);
      for (int v : faces_[f].v) out.on_hull[v] = 1;
    }
    for (int i = 0; i < static_cast<int>(pts_.size()); ++i) {
      if (out.on_hull[i] || !near_[i]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int f : alive) best = std::max(best, faces_[f].dist(pts_[i]));
      if (best >= -tol_) out.on_hull[i] = 1;
    }
    return out;
  }

 private:
  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    const Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    f.n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    f.off = f.n.dot(pts_[a]);
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  void build_simplex(const std::array<int, 4>& s) {
    const Vec3 centroid = (pts_[s[0]] + pts_[s[1]] + pts_[s[2]] + pts_[s[3]]) / 4.0;
    int a = s[0], b = s[1], c = s[2], d = s[3];
    // orient (a,b,c) so that d is below
    const Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    if (n.dot(pts_[d] - pts_[a]) > 0.0) std::swap(b, c);
    make_face(a, b, c);
    make_face(a, d, b);
    make_face(b, d, c);
    make_face(c, d, a);
    (void)centroid;
    link_all();
  }

  // Neighbour links by matching directed edges (only used for the simplex).
  void link_all() {
    std::unordered_map<long long, int> edge_face;
    const long long n = static_cast<long long>(pts_.size());
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      for (int i = 0; i < 3; ++i) edge_face[faces_[f].v[i] * n + faces_[f].v[(i + 1) % 3]] = f;
    }
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      for (int i = 0; i < 3; ++i) {
        faces_[f].nb[i] = edge_face.at(faces_[f].v[(i + 1) % 3] * n + faces_[f].v[i]);
      }
    }
  }

  void assign(int p, const std::vector<int>& candidates) {
    double best = -std::numeric_limits<double>::infinity();
    for (int f : candidates) {
      Face& face = faces_[f];
      if (!face.alive) continue;
      const double d = face.dist(pts_[p]);
      if (d > tol_) {
        face.outside.push_back(p);
        if (d > face.far_dist) {
          face.far_dist = d;
          face.far = p;
        }
        return;
      }
      best = std::max(best, d);
    }
    if (best >= -tol_) near_[p] = 1;
  }

  void add_point(int start) {
    const int eye = faces_[start].far;
    const Vec3& e = pts_[eye];

    // Visible region: faces reachable from `start` through faces that see the eye.
    std::vector<int> visible{start};
    std::vector<char>& mark = mark_;
    mark.resize(faces_.size(), 0);
    mark[start] = 1;
    for (std::size_t i = 0; i < visible.size(); ++i) {
      for (int nb : faces_[visible[i]].nb) {
        if (nb < 0 || mark[nb]) continue;
        if (faces_[nb].dist(e) > tol_) {
          mark[nb] = 1;
          visible.push_back(nb);
        }
      }
    }

    struct HorizonEdge {
      int a, b, outer;
    };
    std::vector<HorizonEdge> horizon;
    for (int f : visible) {
      for (int i = 0; i < 3; ++i) {
        const int nb = faces_[f].nb[i];
        if (!mark[nb]) horizon.push_back({faces_[f].v[i], faces_[f].v[(i + 1) % 3], nb});
      }
    }

    std::vector<int> orphans;
    for (int f : visible) {
      faces_[f].alive = false;
      for (int p : faces_[f].outside) {
        if (p != eye) orphans.push_back(p);
      }
      faces_[f].outside.clear();
      faces_[f].outside.shrink_to_fit();
    }

    std::unordered_map<int, int> by_start;
    std::vector<int> created;
    created.reserve(horizon.size());
    for (const auto& h : horizon) {
      const int nf = make_face(h.a, h.b, eye);
      created.push_back(nf);
      by_start[h.a] = nf;
      faces_[nf].nb[0] = h.outer;
      Face& outer = faces_[h.outer];
      for (int i = 0; i < 3; ++i) {
        if (outer.v[i] == h.b && outer.v[(i + 1) % 3] == h.a) outer.nb[i] = nf;
      }
    }
    for (int nf : created) {
      Face& f = faces_[nf];
      // edge (b, eye) borders the new face starting at b; edge (eye, a) the one ending at a
      auto next = by_start.find(f.v[1]);
      f.nb[1] = next == by_start.end() ? -1 : next->second;
    }
    for (int nf : created) {
      const int nxt = faces_[nf].nb[1];
      if (nxt >= 0) faces_[nxt].nb[2] = nf;
    }
    mark.resize(faces_.size(), 0);
    for (int f : visible) mark[f] = 0;

    // Stable order keeps the result deterministic.
    std::sort(orphans.begin(), orphans.end());
    for (int p : orphans) assign(p, created);
  }

  std::span<const Vec3> pts_;
  double tol_;
  std::vector<Face> faces_;
  std::vector<char> near_;
  std::vector<char> mark_;
};

double point_line_dist(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double l2 = d.squaredNorm();
  if (l2 == 0.0) return (p - a).norm();
  return (p - a).cross(d).norm() / std::sqrt(l2);
}

// Monotone chain on 2D coordinates; points within tol of the polygon boundary are on the hull.
std::vector<char> hull_2d(const std::vector<Vec2>& p, double tol) {
  const int n = static_cast<int>(p.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return p[a].x() < p[b].x() || (p[a].x() == p[b].x() && (p[a].y() < p[b].y() || (p[a].y() == p[b].y() && a < b)));
  });
  auto cross = [&](int o, int a, int b) {
    return (p[a] - p[o]).x() * (p[b] - p[o]).y() - (p[a] - p[o]).y() * (p[b] - p[o]).x();
  };
  std::vector<int> h(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], order[i]) <= 0) --k;
    h[k++] = order[i];
  }
  for (int i = n - 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], order[i]) <= 0) --k;
    h[k++] = order[i];
  }
  h.resize(std::max(k - 1, 1));

  std::vector<char> on(n, 0);
  for (int v : h) on[v] = 1;
  const int m = static_cast<int>(h.size());
  for (int i = 0; i < n; ++i) {
    if (on[i]) continue;
    for (int e = 0; e < m; ++e) {
      const Vec2 a = p[h[e]], b = p[h[(e + 1) % m]];
      const Vec2 d = b - a;
      const double len = d.norm();
      if (len == 0.0) continue;
      const double t = (p[i] - a).dot(d) / (len * len);
      if (t < -1e-12 || t > 1.0 + 1e-12) continue;
      const double dist = std::abs(d.x() * (p[i] - a).y() - d.y() * (p[i] - a).x()) / len;
      if (dist <= tol) {
        on[i] = 1;
        break;
      }
    }
  }
  return on;
}

}  // namespace

HullMembership hull_membership(std::span<const Vec3> pts, double tol_rel) {
  HullMembership out;
  const int n = static_cast<int>(pts.size());
  out.on_hull.assign(n, 0);
  if (n == 0) return out;
  if (n <= 3) {
    // every point of a segment/triangle hull is a vertex unless it is a middle collinear point
    std::fill(out.on_hull.begin(), out.on_hull.end(), 1);
    if (n == 3) {
      for (int i = 0; i < 3; ++i) {
        const Vec3& a = pts[(i + 1) % 3];
        const Vec3& b = pts[(i + 2) % 3];
        const Vec3& c = pts[i];
        if ((c - a).dot(c - b) < 0.0 && point_line_dist(c, a, b) <= 1e-12 * ((a - b).norm() + 1.0)) {
          out.on_hull[i] = 0;
        }
      }
    }
    out.planar_fallback = true;
    return out;
  }

  Eigen::AlignedBox3d box;
  for (const auto& p : pts) box.extend(p);
  const double extent = std::max(box.diagonal().norm(), std::numeric_limits<double>::min());
  const double tol = tol_rel * extent;

  // Initial simplex from extreme points.
  int ext[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 1; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      if (pts[i][a] < pts[ext[2 * a]][a]) ext[2 * a] = i;
      if (pts[i][a] > pts[ext[2 * a + 1]][a]) ext[2 * a + 1] = i;
    }
  }
  int i0 = ext[0], i1 = ext[1];
  double best = -1.0;
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) {
      const double d = (pts[ext[a]] - pts[ext[b]]).squaredNorm();
      if (d > best) {
        best = d;
        i0 = ext[a];
        i1 = ext[b];
      }
    }
  }
  int i2 = -1;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = point_line_dist(pts[i], pts[i0], pts[i1]);
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (best <= tol) {
    // Collinear: only the two extremes (and duplicates of them) bound the segment.
    for (int i = 0; i < n; ++i) {
      if ((pts[i] - pts[i0]).norm() <= tol || (pts[i] - pts[i1]).norm() <= tol) out.on_hull[i] = 1;
    }
    out.planar_fallback = true;
    return out;
  }
  const Vec3 pn = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  int i3 = -1;
  best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(pn.dot(pts[i] - pts[i0]));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (best <= tol) {
    const Vec3 u = (pts[i1] - pts[i0]).normalized();
    const Vec3 v = pn.cross(u);
    std::vector<Vec2> flat(n);
    for (int i = 0; i < n; ++i) flat[i] = Vec2(u.dot(pts[i] - pts[i0]), v.dot(pts[i] - pts[i0]));
    out.on_hull = hull_2d(flat, tol);
    out.planar_fallback = true;
    return out;
  }

  QuickHull qh(pts, tol);
  qh.run({i0, i1, i2, i3});
  return qh.membership();
}

}  // namespace edgereg
