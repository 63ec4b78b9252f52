#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "edgereg/geometry.hpp"
#include "edgereg/image.hpp"

namespace edgereg {

/// Edge pixels with per-pixel unit normal and a unit direction orthogonal to it.
struct EdgeMap2D {
  int width = 0;
  int height = 0;
  std::vector<Vec2> pixels;
  std::vector<Vec2> normals;
  std::vector<Vec2> directions;

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }
  void push_back(const Vec2& p, const Vec2& normal);
};

/// Uniform-grid bucket index over edge pixels. Nearest ties resolve to the
/// smaller (y, x) pixel, i.e. row-major order.
class EdgeGrid {
 public:
  EdgeGrid() = default;
  EdgeGrid(const EdgeMap2D& edges, double cell);

  std::optional<std::size_t> nearest(const Vec2& q, double max_dist) const;
  /// Indices within `radius` of q (unordered).
  std::vector<std::size_t> within(const Vec2& q, double radius) const;

 private:
  const EdgeMap2D* edges_ = nullptr;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::uint32_t> start_;  // CSR layout, nx_*ny_ + 1 entries
  std::vector<std::uint32_t> items_;
};

struct BlurReport {
  double score = 0.0;
  bool is_blurry = true;
};

struct CannyParams {
  double low = 30.0;
  double high = 90.0;
  double sigma = 1.4;
};

/// out(v) = floor(255 * cdf(v) / N).
GrayImage equalize(const GrayImage& img);

/// Variance of the 3x3 Laplacian over the equalized image. Throws ImageTooSmall below 3x3.
BlurReport blur_score(const GrayImage& img, double threshold = 100.0);

/// Gaussian smoothing, Sobel gradients, non-maximum suppression and
/// hysteresis (8-connected). Normals are the unit gradient direction.
/// Throws InvalidArgument unless 0 <= low <= high.
EdgeMap2D canny(const GrayImage& img, const CannyParams& params = {});

/// Per-pixel principal axis of neighbours within `radius`; pixels with fewer
/// than 3 neighbours keep their normal. Normal signs follow the input normals.
/// With `snap`, each pixel is also moved onto its local line (through the neighbour centroid).
EdgeMap2D refine_normals(const EdgeMap2D& edges, double radius = 5.0, bool snap = false);

/// Unit direction of a line in the canonical half-plane (x > 0, or x == 0 and y > 0).
Vec2 canonical_direction(const Vec2& d);

}  // namespace edgereg
