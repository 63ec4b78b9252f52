#pragma once

#include <vector>

#include "edgereg/geometry.hpp"
#include "edgereg/image.hpp"
#include "edgereg/io.hpp"
#include "edgereg/point_cloud.hpp"

namespace edgereg {

struct ColorizeConfig {
  double zbuf_res = 2.0;      // z-buffer cell size, pixels
  double depth_slack = 0.05;  // meters above the cell minimum still counted as visible
};

/// Cloud with an rgb channel; `source_frame[i] < 0` marks an uncolored point (rgb black).
struct ColoredCloud {
  PointCloud cloud;
  std::vector<int> source_frame;
  std::vector<double> depth;  // camera-frame z of the frame that supplied the color

  std::size_t colored_count() const;
};

/// Bilinear sample with edge clamping; px must satisfy 0 <= x <= w-1, 0 <= y <= h-1.
Rgb sample_bilinear(const RgbImage& img, const Vec2& px);

ColoredCloud colorize(const PointCloud& cloud, const RgbImage& image, const Pose& pose, const CameraIntrinsics& intr,
                      const ColorizeConfig& cfg = {}, int frame_id = 0);

/// Per point keep the smaller depth; equal depths keep the smaller frame id.
/// Commutative and associative. Throws InvalidSizes on different point counts.
void merge_colored(ColoredCloud& into, const ColoredCloud& other);

/// Starts every point uncolored.
ColoredCloud uncolored(const PointCloud& cloud);

struct EvalReport {
  int frame = 0;
  std::size_t n_corners = 0;
  double residual_px = 0.0;
  std::vector<double> distances;
};

/// Mean pixel distance between the 2D corners and the projected 3D corners.
/// Throws CountMismatch (including empty lists) and BehindCamera.
EvalReport evaluate_residual(const Pose& pose, const std::vector<Vec3>& corners3d,
                             const std::vector<PixelPoint>& corners2d, const CameraIntrinsics& intr, int frame = 0);
/// Throws CountMismatch when the frame has no 2D corners.
EvalReport evaluate_residual(const Pose& pose, const CheckerboardAnnotation& ann, int frame,
                             const CameraIntrinsics& intr);

}  // namespace edgereg
