#include "edgereg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "edgereg/errors.hpp"

namespace edgereg {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Surface make_surface(const Vec3& corner, const Vec3& u, const Vec3& v, Rgb color) {
  if (!(u.norm() > 0.0 && v.norm() > 0.0)) throw InvalidArgument("synth: degenerate rectangle");
  if (std::abs(u.dot(v)) > 1e-9 * u.norm() * v.norm()) throw InvalidArgument("synth: rectangle edges must be orthogonal");
  return Surface{corner, u, v, color};
}

std::vector<Surface> box_faces(const BoxSpec& b, const Vec3& offset, int index) {
  const Vec3 lo = b.center + offset - 0.5 * b.size;
  const Vec3 x(b.size.x(), 0, 0), y(0, b.size.y(), 0), z(0, 0, b.size.z());
  std::vector<Surface> f{make_surface(lo, y, x, b.color),     make_surface(lo + z, x, y, b.color),
                         make_surface(lo, x, z, b.color),     make_surface(lo + y, z, x, b.color),
                         make_surface(lo, z, y, b.color),     make_surface(lo + x, y, z, b.color)};
  for (auto& s : f) s.box = index;
  return f;
}

Vec3 box_offset(const BoxSpec& b, int scan) {
  if (scan >= 0 && scan < static_cast<int>(b.offsets.size())) return b.offsets[scan];
  return Vec3::Zero();
}

Surface board_surface(const BoardSpec& b, int index) {
  const Mat3 r = b.board_to_world.rotation_matrix();
  Surface s = make_surface(b.board_to_world.translation, r.col(0) * (b.nx * b.square), r.col(1) * (b.ny * b.square),
                           Rgb{255, 255, 255});
  s.board = index;
  return s;
}

bool board_dark(const BoardSpec& b, double s, double t) {
  const int i = std::min(b.nx - 1, static_cast<int>(std::floor(s * b.nx)));
  const int j = std::min(b.ny - 1, static_cast<int>(std::floor(t * b.ny)));
  return ((i + j) & 1) == 0;
}

// Stratified jittered samples (s,t) in [0,1]^2, one per cell.
void sample_rect(const Surface& s, double density, double noise, std::mt19937_64& rng, std::vector<Vec3>& pts,
                 std::vector<Vec2>& params) {
  if (!(density > 0.0)) throw InvalidArgument("synth: density must be > 0");
  const double k = std::sqrt(density);
  const int nu = std::max(1, static_cast<int>(std::lround(s.u.norm() * k)));
  const int nv = std::max(1, static_cast<int>(std::lround(s.v.norm() * k)));
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Vec3 n = s.normal();
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double a = (i + jitter(rng)) / nu;
      const double b = (j + jitter(rng)) / nv;
      Vec3 p = s.corner + a * s.u + b * s.v;
      if (noise > 0.0) p += noise * gauss(rng) * n;
      pts.push_back(p);
      params.emplace_back(a, b);
    }
  }
}

bool occluded(const std::vector<Surface>& surfaces, int self, const Vec3& o, const Vec3& p, double margin) {
  const Vec3 d = p - o;
  const double len = d.norm();
  if (len == 0.0) return false;
  const Vec3 dir = d / len;
  for (int k = 0; k < static_cast<int>(surfaces.size()); ++k) {
    if (k == self) continue;
    if (auto t = surfaces[k].intersect(o, dir); t && *t > 1e-9 && *t < len - margin) return true;
  }
  return false;
}

// Interval of line p + l*d inside the rectangle (closed); false if empty.
bool clip_line_rect(const Surface& s, const Vec3& p, const Vec3& d, double& lo, double& hi) {
  lo = -std::numeric_limits<double>::infinity();
  hi = std::numeric_limits<double>::infinity();
  for (const Vec3& axis : {s.u, s.v}) {
    const double l2 = axis.squaredNorm();
    const double a0 = (p - s.corner).dot(axis) / l2;
    const double da = d.dot(axis) / l2;
    if (std::abs(da) < 1e-12) {
      if (a0 < -1e-9 || a0 > 1.0 + 1e-9) return false;
      continue;
    }
    double t0 = (0.0 - a0) / da, t1 = (1.0 - a0) / da;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  return lo <= hi;
}

std::optional<Edge3D> analytic_edge(const Surface& a, const Surface& b) {
  const Vec3 na = a.normal(), nb = b.normal();
  const Vec3 cr = na.cross(nb);
  if (cr.norm() < 1e-9) return std::nullopt;
  // both planes must contain the line: solve for a point on it
  Eigen::Matrix<double, 2, 3> m;
  m.row(0) = na.transpose();
  m.row(1) = nb.transpose();
  const Eigen::Vector2d rhs(na.dot(a.corner), nb.dot(b.corner));
  const Vec3 p = m.transpose() * (m * m.transpose()).ldlt().solve(rhs);
  const Vec3 d = cr.normalized();
  double lo_a, hi_a, lo_b, hi_b;
  if (!clip_line_rect(a, p, d, lo_a, hi_a) || !clip_line_rect(b, p, d, lo_b, hi_b)) return std::nullopt;
  const double lo = std::max(lo_a, lo_b), hi = std::min(hi_a, hi_b);
  if (hi - lo < 1e-6) return std::nullopt;
  Edge3D e;
  e.a = p + lo * d;
  e.b = p + hi * d;
  e.direction = d;
  e.normals = {na, nb};
  return e;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

// Normalized image coordinates of a (possibly distorted) pixel, by fixed-point iteration.
Vec2 undistort(const CameraIntrinsics& intr, const Vec2& px) {
  const Vec2 xd((px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy);
  if (!intr.has_distortion()) return xd;
  Vec2 x = xd;
  for (int it = 0; it < 20; ++it) {
    const double r2 = x.squaredNorm();
    const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
    const Vec2 tang(2 * intr.p1 * x.x() * x.y() + intr.p2 * (r2 + 2 * x.x() * x.x()),
                    intr.p1 * (r2 + 2 * x.y() * x.y()) + 2 * intr.p2 * x.x() * x.y());
    x = (xd - tang) / radial;
  }
  return x;
}

Rgb shade(const Surface& s, const SceneSpec& spec, const Vec3& hit, const Vec3& dir) {
  Rgb base = s.color;
  if (s.board >= 0) {
    const auto& b = spec.boards[s.board];
    const double a = (hit - s.corner).dot(s.u) / s.u.squaredNorm();
    const double c = (hit - s.corner).dot(s.v) / s.v.squaredNorm();
    base = board_dark(b, a, c) ? Rgb{20, 20, 20} : Rgb{235, 235, 235};
    return base;
  }
  // fixed light direction so adjacent faces of one colour stay distinguishable
  static const Vec3 light = Vec3(0.3, 0.5, 0.8).normalized();
  Vec3 n = s.normal();
  if (n.dot(dir) > 0.0) n = -n;
  const double k = 0.45 + 0.55 * std::abs(n.dot(light));
  return Rgb{static_cast<std::uint8_t>(std::lround(base.r * k)), static_cast<std::uint8_t>(std::lround(base.g * k)),
             static_cast<std::uint8_t>(std::lround(base.b * k))};
}

}  // namespace

std::optional<double> Surface::intersect(const Vec3& o, const Vec3& d) const {
  const Vec3 n = u.cross(v);
  const double den = n.dot(d);
  if (std::abs(den) < 1e-15) return std::nullopt;
  const double t = n.dot(corner - o) / den;
  const Vec3 q = o + t * d - corner;
  const double a = q.dot(u) / u.squaredNorm();
  const double b = q.dot(v) / v.squaredNorm();
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) return std::nullopt;
  return t;
}

std::vector<Surface> Scene::surfaces_at(int scan) const {
  std::vector<Surface> out;
  for (const auto& s : surfaces) {
    if (s.box >= 0) continue;
    out.push_back(s);
  }
  for (int i = 0; i < static_cast<int>(spec.boxes.size()); ++i) {
    const auto f = box_faces(spec.boxes[i], box_offset(spec.boxes[i], scan), i);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

Scene gen_scene(const SceneSpec& spec) {
  Scene scene;
  scene.spec = spec;
  for (const auto& p : spec.planes) scene.surfaces.push_back(make_surface(p.corner, p.u, p.v, p.color));
  for (int i = 0; i < static_cast<int>(spec.boards.size()); ++i) scene.surfaces.push_back(board_surface(spec.boards[i], i));
  for (int i = 0; i < static_cast<int>(spec.boxes.size()); ++i) {
    const auto f = box_faces(spec.boxes[i], Vec3::Zero(), i);
    scene.surfaces.insert(scene.surfaces.end(), f.begin(), f.end());
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<int> owner;  // surface index per point
  std::vector<Vec2> params;
  for (int k = 0; k < static_cast<int>(scene.surfaces.size()); ++k) {
    const auto& s = scene.surfaces[k];
    double density = 0.0;
    if (s.board >= 0) density = spec.boards[s.board].density;
    else if (s.box >= 0) density = spec.boxes[s.box].density;
    else density = spec.planes[k].density;
    const std::size_t before = scene.cloud.points.size();
    sample_rect(s, density, spec.noise_sigma, rng, scene.cloud.points, params);
    owner.resize(scene.cloud.points.size(), k);
    for (std::size_t i = before; i < scene.cloud.points.size(); ++i) {
      float inten = 0.5f;
      if (s.board >= 0) inten = board_dark(spec.boards[s.board], params[i].x(), params[i].y()) ? 0.1f : 0.9f;
      scene.cloud.intensity.push_back(inten);
    }
  }

  // Surfaces are stored static-first, then boxes; surfaces_at keeps that order.
  for (int sidx = 0; sidx < static_cast<int>(spec.scan_poses.size()); ++sidx) {
    const auto geo = scene.surfaces_at(sidx);
    ScanRecord rec;
    rec.scan_id = sidx;
    rec.origin = spec.scan_poses[sidx].center();
    for (std::size_t i = 0; i < scene.cloud.points.size(); ++i) {
      Vec3 p = scene.cloud.points[i];
      const auto& s = scene.surfaces[owner[i]];
      if (s.box >= 0) p += box_offset(spec.boxes[s.box], sidx);
      if ((p - rec.origin).norm() > spec.max_range) continue;
      if (occluded(geo, owner[i], rec.origin, p, 0.01)) continue;
      rec.points.push_back(p);
    }
    scene.scans.push_back(std::move(rec));
  }

  for (std::size_t i = 0; i < scene.surfaces.size(); ++i)
    for (std::size_t j = i + 1; j < scene.surfaces.size(); ++j)
      if (auto e = analytic_edge(scene.surfaces[i], scene.surfaces[j])) scene.edges.push_back(*e);
  return scene;
}

std::vector<Vec3> board_corners(const BoardSpec& board) {
  std::vector<Vec3> out;
  for (int j = 1; j < board.ny; ++j)
    for (int i = 1; i < board.nx; ++i) out.push_back(board.board_to_world.apply(Vec3(i * board.square, j * board.square, 0.0)));
  return out;
}

SyntheticFrame render_frame(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr,
                            const RenderOptions& opts) {
  SyntheticFrame f;
  f.gt_pose = pose;
  f.edges.width = intr.width;
  f.edges.height = intr.height;
  const Vec3 c = pose.center();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (const auto& e : scene.edges) {
    const Vec3 ca = pose.apply(e.a), cb = pose.apply(e.b);
    // clip to the near plane
    const double zn = 0.05;
    double t0 = 0.0, t1 = 1.0;
    if (ca.z() < zn && cb.z() < zn) continue;
    if (ca.z() < zn) t0 = (zn - ca.z()) / (cb.z() - ca.z());
    if (cb.z() < zn) t1 = (zn - ca.z()) / (cb.z() - ca.z());
    const Vec3 wa = e.a + t0 * (e.b - e.a), wb = e.a + t1 * (e.b - e.a);
    const auto pa = try_project(intr, pose.apply(wa)), pb = try_project(intr, pose.apply(wb));
    if (!pa || !pb) continue;
    const double px_len = (*pb - *pa).norm();
    const int n = std::max(2, static_cast<int>(std::ceil(px_len / opts.spacing_px)) + 1);
    bool any = false;
    double vis_lo = 1.0, vis_hi = 0.0;
    for (int k = 0; k < n; ++k) {
      const double s = static_cast<double>(k) / (n - 1);
      const Vec3 w = wa + s * (wb - wa);
      const Vec3 pc = pose.apply(w);
      const auto px = try_project(intr, pc);
      if (!px || !intr.in_image(*px)) continue;
      if (occluded(scene.surfaces, -1, c, w, 1e-6 + 1e-6 * (w - c).norm())) continue;
      const auto px2 = try_project(intr, pose.apply(w + 1e-3 * e.direction));
      if (!px2) continue;
      const Vec2 dir = (*px2 - *px).normalized();
      Vec2 q = *px;
      if (opts.noise_px > 0.0) q += opts.noise_px * Vec2(gauss(rng), gauss(rng));
      f.edges.push_back(q, Vec2(-dir.y(), dir.x()));
      any = true;
      vis_lo = std::min(vis_lo, s);
      vis_hi = std::max(vis_hi, s);
    }
    if (any) {
      Edge3D v = e;
      v.a = wa + vis_lo * (wb - wa);
      v.b = wa + vis_hi * (wb - wa);
      f.visible_edges.push_back(v);
    }
  }

  if (opts.rgb) {
    f.rgb = RgbImage(intr.width, intr.height);
    const Mat3 rt = pose.rotation_matrix().transpose();
    for (int y = 0; y < intr.height; ++y) {
      for (int x = 0; x < intr.width; ++x) {
        int acc[3] = {0, 0, 0};
        for (int sy = 0; sy < 2; ++sy)
          for (int sx = 0; sx < 2; ++sx) {
            const Vec2 xn = undistort(intr, Vec2(x - 0.25 + 0.5 * sx, y - 0.25 + 0.5 * sy));
            const Vec3 dir = (rt * Vec3(xn.x(), xn.y(), 1.0)).normalized();
            double best = std::numeric_limits<double>::infinity();
            int hit = -1;
            for (int k = 0; k < static_cast<int>(scene.surfaces.size()); ++k) {
              if (auto t = scene.surfaces[k].intersect(c, dir); t && *t > 1e-6 && *t < best) {
                best = *t;
                hit = k;
              }
            }
            if (hit < 0) continue;
            const Rgb col = shade(scene.surfaces[hit], scene.spec, c + best * dir, dir);
            acc[0] += col.r;
            acc[1] += col.g;
            acc[2] += col.b;
          }
        f.rgb.set(x, y, Rgb{static_cast<std::uint8_t>((acc[0] + 2) / 4), static_cast<std::uint8_t>((acc[1] + 2) / 4),
                            static_cast<std::uint8_t>((acc[2] + 2) / 4)});
      }
    }
  }
  return f;
}

Pose perturb_pose(const Pose& pose, double rot_deg, double trans_m, std::uint64_t seed) {
  if (!(rot_deg >= 0.0 && trans_m >= 0.0)) throw InvalidArgument("perturb_pose: magnitudes must be >= 0");
  std::mt19937_64 rng(seed);
  const Vec3 axis = random_unit(rng);
  const Vec3 dir = random_unit(rng);
  if (rot_deg == 0.0 && trans_m == 0.0) return pose;
  const Pose cam_to_world = pose.inverse();
  const Eigen::Quaterniond dq(Eigen::AngleAxisd(rot_deg * kDeg, axis));
  Pose moved(cam_to_world.rotation * dq, cam_to_world.translation + trans_m * dir);
  return moved.inverse();
}

PoseError pose_error(const Pose& a, const Pose& b) {
  return {rotation_angle_between(a, b) / kDeg, (a.center() - b.center()).norm()};
}

SceneSpec room_spec(double w, double d, double h, double density, double noise, std::uint64_t seed, bool ceiling) {
  SceneSpec s;
  s.planes.push_back(PlaneSpec{Vec3::Zero(), Vec3(w, 0, 0), Vec3(0, d, 0), density, Rgb{150, 150, 150}});
  s.planes.push_back(PlaneSpec{Vec3::Zero(), Vec3(0, d, 0), Vec3(0, 0, h), density, Rgb{90, 140, 200}});
  s.planes.push_back(PlaneSpec{Vec3::Zero(), Vec3(0, 0, h), Vec3(w, 0, 0), density, Rgb{200, 170, 90}});
  if (ceiling) s.planes.push_back(PlaneSpec{Vec3(0, 0, h), Vec3(0, d, 0), Vec3(w, 0, 0), density, Rgb{230, 230, 230}});
  s.noise_sigma = noise;
  s.seed = seed;
  return s;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r_cw;
  r_cw.col(0) = x;
  r_cw.col(1) = y;
  r_cw.col(2) = z;
  const Mat3 r = r_cw.transpose();
  return Pose(r, -(r * eye));
}

CheckerboardAnnotation make_annotation(const BoardSpec& board, const std::vector<Pose>& frames,
                                       const CameraIntrinsics& intr, double noise_px, std::uint64_t seed) {
  CheckerboardAnnotation ann;
  ann.corners3d = board_corners(board);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
    std::vector<PixelPoint> px;
    for (const auto& p : ann.corners3d) {
      PixelPoint q = project(intr, frames[f].apply(p));
      if (noise_px > 0.0) q += noise_px * PixelPoint(g(rng), g(rng));
      px.push_back(q);
    }
    ann.corners2d[f] = std::move(px);
  }
  return ann;
}

}  // namespace edgereg
