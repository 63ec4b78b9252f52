#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "edgereg/dynamic_removal.hpp"
#include "edgereg/edge2d.hpp"
#include "edgereg/edge3d.hpp"
#include "edgereg/image.hpp"
#include "edgereg/io.hpp"
#include "edgereg/point_cloud.hpp"

namespace edgereg {

/// Rectangle corner + s*u + t*v, s,t in [0,1]; u and v must be orthogonal.
struct PlaneSpec {
  Vec3 corner = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  double density = 400.0;  // points per m^2
  Rgb color{180, 180, 180};
};

/// Axis-aligned box. offsets[s] displaces it in scan s (missing entries mean no displacement).
struct BoxSpec {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  std::vector<Vec3> offsets;
  double density = 400.0;
  Rgb color{200, 60, 60};
};

/// Checkerboard of nx by ny squares in the board frame's z = 0 plane, spanning
/// [0, nx*square] x [0, ny*square].
struct BoardSpec {
  Pose board_to_world;
  int nx = 7;
  int ny = 5;
  double square = 0.1;
  double density = 2500.0;
};

struct SceneSpec {
  std::vector<PlaneSpec> planes;
  std::vector<BoxSpec> boxes;
  std::vector<BoardSpec> boards;
  std::vector<Pose> scan_poses;  // world -> sensor
  double noise_sigma = 0.005;    // along the surface normal, meters
  double max_range = 60.0;
  std::uint64_t seed = 0;
};

/// One rectangle of scene geometry.
struct Surface {
  Vec3 corner, u, v;
  Rgb color;
  int board = -1;  // index into SceneSpec::boards for checker texturing
  int box = -1;    // index into SceneSpec::boxes

  Vec3 normal() const { return u.cross(v).normalized(); }
  /// Ray parameter of the hit with o + t*d, if it lands inside the rectangle.
  std::optional<double> intersect(const Vec3& o, const Vec3& d) const;
};

struct Scene {
  SceneSpec spec;
  std::vector<Surface> surfaces;  // static state (boxes at their base position)
  PointCloud cloud;               // all sampled points, static state; intensity channel set
  std::vector<ScanRecord> scans;
  std::vector<Edge3D> edges;      // analytic plane-pair intersections

  /// Surfaces with boxes moved to their scan-s position.
  std::vector<Surface> surfaces_at(int scan) const;
};

/// Throws InvalidArgument on non-orthogonal rectangles or non-positive densities.
Scene gen_scene(const SceneSpec& spec);

/// Inner board corners in world coordinates, row-major over the grid.
std::vector<Vec3> board_corners(const BoardSpec& board);

struct RenderOptions {
  double noise_px = 0.0;
  double spacing_px = 0.5;  // along-edge spacing of rasterized edge points
  bool rgb = true;
  std::uint64_t seed = 0;
};

struct SyntheticFrame {
  Pose gt_pose;               // world -> camera
  EdgeMap2D edges;            // sub-pixel points on visible projected analytic edges
  std::vector<Edge3D> visible_edges;
  RgbImage rgb;               // flat-shaded, 2x2 supersampled
};

SyntheticFrame render_frame(const Scene& scene, const Pose& pose, const CameraIntrinsics& intr,
                            const RenderOptions& opts = {});

/// Rotation by exactly rot_deg about a random axis and a camera-centre shift
/// of exactly trans_m in a random direction; deterministic per seed.
Pose perturb_pose(const Pose& pose, double rot_deg, double trans_m, std::uint64_t seed);

struct PoseError {
  double rot_deg = 0.0;
  double trans_m = 0.0;  // distance between camera centres
};
PoseError pose_error(const Pose& a, const Pose& b);

/// Room with floor z = 0 over [0,w]x[0,d] and walls x = 0 and y = 0 of height h,
/// optionally closed by a ceiling at z = h.
SceneSpec room_spec(double w = 6.0, double d = 5.0, double h = 3.0, double density = 400.0, double noise = 0.005,
                    std::uint64_t seed = 0, bool ceiling = false);

/// Camera at `eye` looking at `target` with world +z up (image y down).
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Checkerboard annotation: 3D corners plus, per frame, their exact projections.
CheckerboardAnnotation make_annotation(const BoardSpec& board, const std::vector<Pose>& frames,
                                       const CameraIntrinsics& intr, double noise_px = 0.0, std::uint64_t seed = 0);

}  // namespace edgereg
