#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "edgereg/geometry.hpp"

namespace edgereg {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Point positions with optional parallel attribute channels. An attribute
/// channel is either empty or exactly as long as `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<float> intensity;
  std::vector<Rgb> rgb;
  std::vector<std::int32_t> scan_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_intensity() const { return !intensity.empty(); }
  bool has_rgb() const { return !rgb.empty(); }
  bool has_scan_id() const { return !scan_id.empty(); }

  /// Throws InvalidArgument on mismatched channel lengths or intensities outside [0,1].
  void validate() const;
  PointCloud subset(std::span<const std::uint32_t> indices) const;
  /// Appends `other`; channels present on only one side are filled with defaults.
  void append(const PointCloud& other);
};

enum class CloudFormat { kPlyAscii, kPlyBinary, kPcdAscii };

/// Reads ASCII / binary-little-endian PLY or ASCII PCD. Unknown attributes are ignored.
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 CloudFormat format = CloudFormat::kPlyBinary);

/// Line-segment dump: vertices plus an `edge` element of index pairs (ASCII PLY).
void write_segments_ply(const std::vector<std::pair<Vec3, Vec3>>& segments,
                        const std::filesystem::path& path);

}  // namespace edgereg
