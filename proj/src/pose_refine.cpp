#include "edgereg/pose_refine.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "edgereg/errors.hpp"

namespace edgereg {

void RefineConfig::validate() const {
  if (max_outer_iters < 1) throw ConfigError("refine: max_outer_iters must be >= 1");
  if (max_inner_iters < 1) throw ConfigError("refine: max_inner_iters must be >= 1");
  if (!(sample_spacing > 0 && max_px_dist > 0 && max_angle_deg > 0 && huber_delta > 0 && degeneracy_cond_max > 0 &&
        converge_rot > 0 && converge_trans > 0))
    throw ConfigError("refine: thresholds must be positive");
  if (min_correspondences < 1) throw ConfigError("refine: min_correspondences must be >= 1");
  if (!(noise.sigma_lidar > 0 && noise.sigma_cam > 0)) throw ConfigError("refine: noise sigmas must be positive");
}

std::string to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::Converged: return "Converged";
    case RefineStatus::MaxIters: return "MaxIters";
    case RefineStatus::Degenerate: return "Degenerate";
    case RefineStatus::InsufficientMatches: return "InsufficientMatches";
  }
  return "Unknown";
}

std::vector<EdgeSample> sample_edges(const std::vector<Edge3D>& edges, double spacing) {
  if (!(spacing > 0.0)) throw InvalidArgument("sample_edges: spacing must be > 0");
  std::vector<EdgeSample> out;
  for (const auto& e : edges) {
    const Vec3 d = e.b - e.a;
    const double len = d.norm();
    const Vec3 dir = len > 0 ? Vec3(d / len) : e.direction;
    const auto steps = static_cast<long>(std::floor(len / spacing + 1e-9));
    for (long k = 0; k <= steps; ++k) {
      const double s = std::min(len, static_cast<double>(k) * spacing);
      out.push_back({e.a + s * dir, dir});
    }
    if (len - static_cast<double>(steps) * spacing > 1e-9 * spacing) out.push_back({e.b, dir});
  }
  return out;
}

std::vector<Correspondence> associate(const std::vector<EdgeSample>& samples, const Pose& pose,
                                      const CameraIntrinsics& intr, const EdgeMap2D& edges2d, const EdgeGrid& grid,
                                      const RefineConfig& cfg) {
  std::vector<Correspondence> out;
  const double cos_gate = std::cos(cfg.max_angle_deg * M_PI / 180.0);
  const double var_cam = cfg.noise.sigma_cam * cfg.noise.sigma_cam;
  for (const auto& s : samples) {
    const Vec3 pc = pose.apply(s.x);
    const auto px = try_project(intr, pc);
    if (!px || !intr.in_image(*px)) continue;
    const auto j = grid.nearest(*px, cfg.max_px_dist);
    if (!j) continue;
    const Vec2 d2 = project_jacobian(intr, pc) * (pose.rotation * s.direction);
    if (d2.norm() < 1e-12) continue;
    if (std::abs(d2.normalized().dot(edges2d.directions[*j])) < cos_gate) continue;
    const double sl = cfg.noise.sigma_lidar * intr.fx / pc.z();
    out.push_back({s.x, edges2d.pixels[*j], edges2d.normals[*j], 1.0 / (var_cam + sl * sl)});
  }
  return out;
}

std::vector<Correspondence> associate(const std::vector<EdgeSample>& samples, const Pose& pose,
                                      const CameraIntrinsics& intr, const EdgeMap2D& edges2d,
                                      const RefineConfig& cfg) {
  const EdgeGrid grid(edges2d, std::max(1.0, cfg.max_px_dist));
  return associate(samples, pose, intr, edges2d, grid, cfg);
}

double point_line_residual(const Correspondence& c, const Pose& pose, const CameraIntrinsics& intr) {
  return c.n.dot(project(intr, pose.apply(c.x)) - c.y);
}

Eigen::Matrix<double, 1, 6> point_line_jacobian(const Correspondence& c, const Pose& pose,
                                                const CameraIntrinsics& intr) {
  return c.n.transpose() * projection_twist_jacobian(intr, pose, c.x);
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

namespace {

// Robust cost; +inf when any point falls behind the camera.
double cost(const std::vector<Correspondence>& corr, const Pose& pose, const CameraIntrinsics& intr, double delta) {
  double c = 0.0;
  for (const auto& k : corr) {
    const Vec3 pc = pose.apply(k.x);
    if (pc.z() <= kDefaultEpsilonZ) return std::numeric_limits<double>::infinity();
    c += k.weight * huber(k.n.dot(project(intr, pc) - k.y), delta);
  }
  return c;
}

struct Normal {
  Mat6 h = Mat6::Zero();
  Vec6 g = Vec6::Zero();
};

Normal build_normal(const std::vector<Correspondence>& corr, const Pose& pose, const CameraIntrinsics& intr,
                    double delta) {
  Normal ne;
  for (const auto& k : corr) {
    const double r = point_line_residual(k, pose, intr);
    const auto j = point_line_jacobian(k, pose, intr);
    const double a = std::abs(r);
    const double w = k.weight * (a <= delta ? 1.0 : delta / a);
    ne.h.noalias() += w * j.transpose() * j;
    ne.g.noalias() += w * r * j.transpose();
  }
  return ne;
}

double condition(const Mat6& h) {
  const Eigen::SelfAdjointEigenSolver<Mat6> es(h, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(5);
  if (!(hi > 0.0) || !(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

double mean_abs(const std::vector<Correspondence>& corr, const Pose& pose, const CameraIntrinsics& intr) {
  if (corr.empty()) return 0.0;
  double s = 0.0;
  for (const auto& k : corr) s += std::abs(point_line_residual(k, pose, intr));
  return s / static_cast<double>(corr.size());
}

}  // namespace

RefineResult refine_pose(const Pose& init, const std::vector<Edge3D>& edges3d, const EdgeMap2D& edges2d,
                         const CameraIntrinsics& intr, const RefineConfig& cfg) {
  cfg.validate();
  RefineResult res;
  res.pose = init;
  const auto samples = sample_edges(edges3d, cfg.sample_spacing);
  const EdgeGrid grid(edges2d, std::max(1.0, cfg.max_px_dist));
  auto fail = [&](RefineStatus s) {
    res.pose = init;
    res.status = s;
    return res;
  };

  Pose pose = init;
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    const auto corr = associate(samples, pose, intr, edges2d, grid, cfg);
    IterationStats st;
    st.correspondences = corr.size();
    if (static_cast<int>(corr.size()) < cfg.min_correspondences) return fail(RefineStatus::InsufficientMatches);

    const Pose start = pose;
    double f = cost(corr, pose, intr, cfg.huber_delta);
    st.cost_trace.push_back(f);
    double lambda = 0.0;
    for (int inner = 0; inner < cfg.max_inner_iters; ++inner) {
      const auto ne = build_normal(corr, pose, intr, cfg.huber_delta);
      res.condition_number = condition(ne.h);
      if (!(res.condition_number <= cfg.degeneracy_cond_max)) return fail(RefineStatus::Degenerate);
      bool accepted = false;
      Vec6 xi = Vec6::Zero();
      for (int tries = 0; tries < 12; ++tries) {
        Mat6 a = ne.h;
        a.diagonal().array() += lambda * ne.h.diagonal().array();
        xi = a.ldlt().solve(-ne.g);
        if (!xi.allFinite() || xi.tail<3>().norm() >= M_PI) {
          lambda = std::max(1e-6, lambda * 10.0);
          continue;
        }
        const Pose cand = retract(pose, xi);
        const double fc = cost(corr, cand, intr, cfg.huber_delta);
        if (fc <= f) {
          pose = cand;
          f = fc;
          st.cost_trace.push_back(f);
          lambda *= 0.1;
          if (lambda < 1e-9) lambda = 0.0;
          accepted = true;
          break;
        }
        lambda = lambda == 0.0 ? 1e-4 : lambda * 10.0;
      }
      if (!accepted || (xi.tail<3>().norm() < 1e-10 && xi.head<3>().norm() < 1e-10)) break;
    }
    st.mean_abs_residual_px = mean_abs(corr, pose, intr);
    st.delta_rot = rotation_angle_between(start, pose);
    st.delta_trans = (start.center() - pose.center()).norm();
    res.iterations.push_back(st);
    if (st.delta_rot < cfg.converge_rot && st.delta_trans < cfg.converge_trans) {
      res.pose = pose;
      res.status = RefineStatus::Converged;
      return res;
    }
  }
  res.pose = pose;
  res.status = RefineStatus::MaxIters;
  return res;
}

}  // namespace edgereg
