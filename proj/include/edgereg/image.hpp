#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "edgereg/point_cloud.hpp"

namespace edgereg {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return data.empty(); }
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {});
  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    data[i] = c.r;
    data[i + 1] = c.g;
    data[i + 2] = c.b;
  }
  bool empty() const { return data.empty(); }
};

/// Rec.601 luma, rounded.
GrayImage to_gray(const RgbImage& img);
RgbImage to_rgb(const GrayImage& img);

/// PNG (8-bit gray/RGB/RGBA/palette), binary or ASCII PGM/PPM. Gray inputs are
/// replicated into three channels. Throws IoError / ParseError / UnsupportedFormat.
RgbImage read_image(const std::filesystem::path& path);
GrayImage read_gray(const std::filesystem::path& path);

/// Format chosen from the extension: .png, .pgm or .ppm.
void write_image(const RgbImage& img, const std::filesystem::path& path);
void write_image(const GrayImage& img, const std::filesystem::path& path);

}  // namespace edgereg
