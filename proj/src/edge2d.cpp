#include "edgereg/edge2d.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>

#include "edgereg/errors.hpp"

namespace edgereg {

Vec2 canonical_direction(const Vec2& d) {
  const Vec2 u = d.normalized();
  if (u.x() > 1e-12 || (std::abs(u.x()) <= 1e-12 && u.y() > 0.0)) return u;
  return -u;
}

void EdgeMap2D::push_back(const Vec2& p, const Vec2& normal) {
  const Vec2 n = normal.normalized();
  pixels.push_back(p);
  normals.push_back(n);
  directions.emplace_back(n.y(), -n.x());
}

EdgeGrid::EdgeGrid(const EdgeMap2D& edges, double cell) : edges_(&edges), cell_(cell) {
  if (!(cell > 0.0)) throw InvalidArgument("EdgeGrid: cell must be > 0");
  const double w = std::max(1, edges.width), h = std::max(1, edges.height);
  nx_ = static_cast<int>(std::ceil(w / cell)) + 1;
  ny_ = static_cast<int>(std::ceil(h / cell)) + 1;
  auto bucket = [&](const Vec2& p) {
    const int cx = std::clamp(static_cast<int>(std::floor(p.x() / cell_)), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(p.y() / cell_)), 0, ny_ - 1);
    return static_cast<std::size_t>(cy) * nx_ + cx;
  };
  start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
  for (const auto& p : edges.pixels) ++start_[bucket(p) + 1];
  for (std::size_t i = 1; i < start_.size(); ++i) start_[i] += start_[i - 1];
  items_.resize(edges.pixels.size());
  std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
  for (std::uint32_t i = 0; i < edges.pixels.size(); ++i) items_[fill[bucket(edges.pixels[i])]++] = i;
}

std::vector<std::size_t> EdgeGrid::within(const Vec2& q, double radius) const {
  std::vector<std::size_t> out;
  if (!edges_ || items_.empty()) return out;
  const int x0 = std::max(0, static_cast<int>(std::floor((q.x() - radius) / cell_)));
  const int x1 = std::min(nx_ - 1, static_cast<int>(std::floor((q.x() + radius) / cell_)));
  const int y0 = std::max(0, static_cast<int>(std::floor((q.y() - radius) / cell_)));
  const int y1 = std::min(ny_ - 1, static_cast<int>(std::floor((q.y() + radius) / cell_)));
  const double r2 = radius * radius;
  for (int cy = y0; cy <= y1; ++cy) {
    for (int cx = x0; cx <= x1; ++cx) {
      const std::size_t b = static_cast<std::size_t>(cy) * nx_ + cx;
      for (std::uint32_t k = start_[b]; k < start_[b + 1]; ++k) {
        const auto i = items_[k];
        if ((edges_->pixels[i] - q).squaredNorm() <= r2) out.push_back(i);
      }
    }
  }
  return out;
}

std::optional<std::size_t> EdgeGrid::nearest(const Vec2& q, double max_dist) const {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (auto i : within(q, max_dist)) {
    const Vec2& p = edges_->pixels[i];
    const double d = (p - q).squaredNorm();
    if (!best) {
      best = i;
      best_d = d;
      continue;
    }
    const Vec2& b = edges_->pixels[*best];
    if (d < best_d || (d == best_d && (p.y() < b.y() || (p.y() == b.y() && p.x() < b.x())))) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

GrayImage equalize(const GrayImage& img) {
  GrayImage out = img;
  if (img.data.empty()) return out;
  std::array<std::size_t, 256> hist{};
  for (auto v : img.data) ++hist[v];
  std::array<std::uint8_t, 256> lut{};
  std::size_t cdf = 0;
  const std::size_t n = img.data.size();
  for (int v = 0; v < 256; ++v) {
    cdf += hist[v];
    lut[v] = static_cast<std::uint8_t>((255 * cdf) / n);
  }
  for (auto& v : out.data) v = lut[v];
  return out;
}

BlurReport blur_score(const GrayImage& img, double threshold) {
  if (img.width < 3 || img.height < 3) throw ImageTooSmall("blur_score: image must be at least 3x3");
  const GrayImage eq = equalize(img);
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (int y = 1; y + 1 < eq.height; ++y) {
    for (int x = 1; x + 1 < eq.width; ++x) {
      const double l = eq.at(x - 1, y) + eq.at(x + 1, y) + eq.at(x, y - 1) + eq.at(x, y + 1) - 4.0 * eq.at(x, y);
      sum += l;
      sum2 += l * l;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  BlurReport r;
  r.score = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
  r.is_blurry = r.score < threshold;
  return r;
}

namespace {

std::vector<double> gaussian_blur(const GrayImage& img, double sigma) {
  const int w = img.width, h = img.height;
  std::vector<double> src(img.data.begin(), img.data.end());
  if (sigma <= 0.0) return src;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double ks = 0.0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * src[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

}  // namespace

EdgeMap2D canny(const GrayImage& img, const CannyParams& params) {
  if (!(params.low >= 0.0 && params.low <= params.high)) throw InvalidArgument("canny: need 0 <= low <= high");
  EdgeMap2D out;
  out.width = img.width;
  out.height = img.height;
  const int w = img.width, h = img.height;
  if (w < 3 || h < 3) return out;
  const auto s = gaussian_blur(img, params.sigma);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> gx(n, 0.0), gy(n, 0.0), mag(n, 0.0);
  auto at = [&](int x, int y) { return s[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      gy[i] = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      mag[i] = std::hypot(gx[i], gy[i]);
    }

  // 0: suppressed, 1: weak, 2: strong
  std::vector<std::uint8_t> cls(n, 0);
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (m < params.low || m == 0.0) continue;
      double a = std::atan2(gy[i], gx[i]) * 180.0 / M_PI;
      if (a < 0) a += 180.0;
      int dx, dy;
      if (a < 22.5 || a >= 157.5) dx = 1, dy = 0;
      else if (a < 67.5) dx = 1, dy = 1;
      else if (a < 112.5) dx = 0, dy = 1;
      else dx = -1, dy = 1;
      const double m1 = mag[static_cast<std::size_t>(y + dy) * w + (x + dx)];
      const double m2 = mag[static_cast<std::size_t>(y - dy) * w + (x - dx)];
      // ties broken toward the forward neighbour so plateaus keep one pixel
      if (m > m1 && m >= m2) cls[i] = m >= params.high ? 2 : 1;
    }

  std::vector<std::uint32_t> stack;
  for (std::uint32_t i = 0; i < n; ++i)
    if (cls[i] == 2) stack.push_back(i);
  while (!stack.empty()) {
    const std::uint32_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const std::uint32_t j = static_cast<std::uint32_t>((y + dy) * w + (x + dx));
        if (cls[j] == 1) {
          cls[j] = 2;
          stack.push_back(j);
        }
      }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] != 2) continue;
    out.push_back(Vec2(static_cast<double>(i % w), static_cast<double>(i / w)), Vec2(gx[i], gy[i]));
  }
  return out;
}

EdgeMap2D refine_normals(const EdgeMap2D& edges, double radius, bool snap) {
  if (!(radius >= 1.0)) throw InvalidArgument("refine_normals: radius must be >= 1");
  EdgeMap2D out = edges;
  const EdgeGrid grid(edges, radius);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto nb = grid.within(edges.pixels[i], radius);
    if (nb.size() < 4) continue;  // includes the pixel itself
    Vec2 mean = Vec2::Zero();
    for (auto j : nb) mean += edges.pixels[j];
    mean /= static_cast<double>(nb.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (auto j : nb) {
      const Vec2 q = edges.pixels[j] - mean;
      cov += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Vec2 dir = canonical_direction(es.eigenvectors().col(1));
    Vec2 nrm(-dir.y(), dir.x());
    if (nrm.dot(edges.normals[i]) < 0.0) nrm = -nrm;
    out.normals[i] = nrm;
    out.directions[i] = dir;
    if (snap) out.pixels[i] = edges.pixels[i] - nrm.dot(edges.pixels[i] - mean) * nrm;
  }
  return out;
}

}  // namespace edgereg
