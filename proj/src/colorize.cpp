#include "edgereg/colorize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edgereg/errors.hpp"

namespace edgereg {

std::size_t ColoredCloud::colored_count() const {
  return static_cast<std::size_t>(std::count_if(source_frame.begin(), source_frame.end(), [](int f) { return f >= 0; }));
}

Rgb sample_bilinear(const RgbImage& img, const Vec2& px) {
  const double x = std::clamp(px.x(), 0.0, static_cast<double>(img.width - 1));
  const double y = std::clamp(px.y(), 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0, fy = y - y0;
  const Rgb c00 = img.at(x0, y0), c10 = img.at(x1, y0), c01 = img.at(x0, y1), c11 = img.at(x1, y1);
  auto mix = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    const double v = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  return {mix(c00.r, c10.r, c01.r, c11.r), mix(c00.g, c10.g, c01.g, c11.g), mix(c00.b, c10.b, c01.b, c11.b)};
}

ColoredCloud uncolored(const PointCloud& cloud) {
  ColoredCloud out;
  out.cloud = cloud;
  out.cloud.rgb.assign(cloud.size(), Rgb{});
  out.source_frame.assign(cloud.size(), -1);
  out.depth.assign(cloud.size(), std::numeric_limits<double>::infinity());
  return out;
}

ColoredCloud colorize(const PointCloud& cloud, const RgbImage& image, const Pose& pose, const CameraIntrinsics& intr,
                      const ColorizeConfig& cfg, int frame_id) {
  if (!(cfg.zbuf_res > 0.0) || !(cfg.depth_slack >= 0.0)) throw InvalidArgument("colorize: bad z-buffer settings");
  ColoredCloud out = uncolored(cloud);
  const int w = std::min(intr.width, image.width), h = std::min(intr.height, image.height);
  const int gw = static_cast<int>(std::ceil(w / cfg.zbuf_res)), gh = static_cast<int>(std::ceil(h / cfg.zbuf_res));
  std::vector<double> zbuf(static_cast<std::size_t>(gw) * gh, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> cell(cloud.size(), -1);
  std::vector<Vec2> pix(cloud.size());
  std::vector<double> z(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 pc = pose.apply(cloud.points[i]);
    const auto px = try_project(intr, pc);
    if (!px || px->x() < 0.0 || px->y() < 0.0 || px->x() > w - 1 || px->y() > h - 1) continue;
    const int cx = std::min(gw - 1, static_cast<int>(px->x() / cfg.zbuf_res));
    const int cy = std::min(gh - 1, static_cast<int>(px->y() / cfg.zbuf_res));
    cell[i] = static_cast<std::int64_t>(cy) * gw + cx;
    pix[i] = *px;
    z[i] = pc.z();
    zbuf[cell[i]] = std::min(zbuf[cell[i]], pc.z());
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cell[i] < 0 || z[i] > zbuf[cell[i]] + cfg.depth_slack) continue;
    out.cloud.rgb[i] = sample_bilinear(image, pix[i]);
    out.source_frame[i] = frame_id;
    out.depth[i] = z[i];
  }
  return out;
}

void merge_colored(ColoredCloud& into, const ColoredCloud& other) {
  if (into.cloud.size() != other.cloud.size()) throw InvalidSizes("merge_colored: point counts differ");
  for (std::size_t i = 0; i < other.cloud.size(); ++i) {
    if (other.source_frame[i] < 0) continue;
    const bool take = into.source_frame[i] < 0 || other.depth[i] < into.depth[i] ||
                      (other.depth[i] == into.depth[i] && other.source_frame[i] < into.source_frame[i]);
    if (!take) continue;
    into.cloud.rgb[i] = other.cloud.rgb[i];
    into.source_frame[i] = other.source_frame[i];
    into.depth[i] = other.depth[i];
  }
}

EvalReport evaluate_residual(const Pose& pose, const std::vector<Vec3>& corners3d,
                             const std::vector<PixelPoint>& corners2d, const CameraIntrinsics& intr, int frame) {
  if (corners3d.empty() || corners3d.size() != corners2d.size())
    throw CountMismatch("evaluate_residual: need equally long, nonempty corner lists");
  EvalReport r;
  r.frame = frame;
  r.n_corners = corners3d.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < corners3d.size(); ++i) {
    const double d = (corners2d[i] - project(intr, pose.apply(corners3d[i]))).norm();
    r.distances.push_back(d);
    sum += d;
  }
  r.residual_px = sum / static_cast<double>(r.n_corners);
  return r;
}

EvalReport evaluate_residual(const Pose& pose, const CheckerboardAnnotation& ann, int frame,
                             const CameraIntrinsics& intr) {
  const auto it = ann.corners2d.find(frame);
  if (it == ann.corners2d.end()) throw CountMismatch("evaluate_residual: no 2D corners for frame " + std::to_string(frame));
  return evaluate_residual(pose, ann.corners3d, it->second, intr, frame);
}

}  // namespace edgereg
