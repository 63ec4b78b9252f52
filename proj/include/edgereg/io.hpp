#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include <json.hpp>

#include "edgereg/geometry.hpp"

namespace edgereg {

/// One line of a trajectory file. The stored pose maps camera coordinates to
/// world coordinates; use `world_to_camera()` for projection.
struct TrajectoryEntry {
  double timestamp = 0.0;
  Pose camera_to_world;

  Pose world_to_camera() const { return camera_to_world.inverse(); }
};

/// Whitespace-separated "timestamp tx ty tz qx qy qz qw" lines; '#' starts a comment line.
/// Quaternions are renormalized on load. Throws ParseError / NonMonotonicTimestamps.
std::vector<TrajectoryEntry> read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::vector<TrajectoryEntry>& traj, const std::filesystem::path& path);

/// Checkerboard corners picked in the map (world frame) and detected per image.
struct CheckerboardAnnotation {
  std::vector<Vec3> corners3d;
  std::map<int, std::vector<PixelPoint>> corners2d;  // frame id -> corners, same order as corners3d
};

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CameraIntrinsics& intr);
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);

CheckerboardAnnotation annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CheckerboardAnnotation& ann);
CheckerboardAnnotation read_annotation(const std::filesystem::path& path);

nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Pose& p);  // {"t":[x,y,z],"q":[w,x,y,z]}
Pose pose_from_json(const nlohmann::json& j);

}  // namespace edgereg
