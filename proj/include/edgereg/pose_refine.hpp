#pragma once

#include <string>
#include <vector>

#include "edgereg/edge2d.hpp"
#include "edgereg/edge3d.hpp"
#include "edgereg/geometry.hpp"

namespace edgereg {

struct EdgeSample {
  Vec3 x = Vec3::Zero();          // world frame
  Vec3 direction = Vec3::UnitX();  // unit segment direction
};

struct Correspondence {
  Vec3 x = Vec3::Zero();
  PixelPoint y = PixelPoint::Zero();
  Vec2 n = Vec2::UnitX();  // unit 2D edge normal at y
  double weight = 0.0;
};

struct NoiseModel {
  double sigma_lidar = 0.02;  // meters
  double sigma_cam = 1.5;     // pixels
};

struct RefineConfig {
  int max_outer_iters = 3;
  double sample_spacing = 0.0625;
  double max_px_dist = 20.0;
  double max_angle_deg = 10.0;
  double huber_delta = 2.0;
  int min_correspondences = 30;
  double degeneracy_cond_max = 1e6;
  NoiseModel noise;
  int max_inner_iters = 10;
  double converge_rot = 1e-4;    // radians
  double converge_trans = 1e-4;  // meters

  void validate() const;  // throws ConfigError
};

enum class RefineStatus { Converged, MaxIters, Degenerate, InsufficientMatches };
std::string to_string(RefineStatus s);

struct IterationStats {
  std::size_t correspondences = 0;
  double mean_abs_residual_px = 0.0;  // at the end of the iteration
  double delta_rot = 0.0;             // radians
  double delta_trans = 0.0;           // meters, camera centre displacement
  std::vector<double> cost_trace;     // robust cost before the first and after each accepted step
};

struct RefineResult {
  Pose pose;
  RefineStatus status = RefineStatus::MaxIters;
  std::vector<IterationStats> iterations;
  double condition_number = 0.0;  // of the last normal matrix examined
};

/// Points at multiples of `spacing` from `a`, plus `b`. Throws InvalidArgument on spacing <= 0.
std::vector<EdgeSample> sample_edges(const std::vector<Edge3D>& edges, double spacing);

/// Nearest-pixel association with the direction gate. `grid` must index `edges2d`.
std::vector<Correspondence> associate(const std::vector<EdgeSample>& samples, const Pose& pose,
                                      const CameraIntrinsics& intr, const EdgeMap2D& edges2d, const EdgeGrid& grid,
                                      const RefineConfig& cfg = {});
std::vector<Correspondence> associate(const std::vector<EdgeSample>& samples, const Pose& pose,
                                      const CameraIntrinsics& intr, const EdgeMap2D& edges2d,
                                      const RefineConfig& cfg = {});

/// n^T (project(pose * x) - y). Throws BehindCamera.
double point_line_residual(const Correspondence& c, const Pose& pose, const CameraIntrinsics& intr);
/// Derivative of the residual w.r.t. a left twist update.
Eigen::Matrix<double, 1, 6> point_line_jacobian(const Correspondence& c, const Pose& pose,
                                                const CameraIntrinsics& intr);

double huber(double r, double delta);

RefineResult refine_pose(const Pose& init, const std::vector<Edge3D>& edges3d, const EdgeMap2D& edges2d,
                         const CameraIntrinsics& intr, const RefineConfig& cfg = {});

}  // namespace edgereg
