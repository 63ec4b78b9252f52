#include "edgereg/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "edgereg/errors.hpp"

namespace edgereg {

std::vector<TrajectoryEntry> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory " + path.string());
  std::vector<TrajectoryEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 8 columns");
      }
    }
    std::string extra;
    if (ls >> extra) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": trailing data");
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 1e-12) || !std::isfinite(q.norm())) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": degenerate quaternion");
    }
    TrajectoryEntry e;
    e.timestamp = v[0];
    // Unit to machine precision is kept as written so that roundtrips are bit-exact.
    e.camera_to_world.rotation = std::abs(q.squaredNorm() - 1.0) <= 1e-12 ? q : q.normalized();
    e.camera_to_world.translation = Vec3(v[1], v[2], v[3]);
    if (!out.empty() && !(e.timestamp > out.back().timestamp)) {
      throw NonMonotonicTimestamps(path.string() + ":" + std::to_string(line_no) +
                                   ": timestamps must be strictly increasing");
    }
    out.push_back(e);
  }
  return out;
}

void write_trajectory(const std::vector<TrajectoryEntry>& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory " + path.string());
  out << "# timestamp tx ty tz qx qy qz qw\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : traj) {
    const auto& t = e.camera_to_world.translation;
    const auto& q = e.camera_to_world.rotation;
    out << e.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y()
        << ' ' << q.z() << ' ' << q.w() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected [x, y, z], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json to_json(const Pose& p) {
  return {{"t", to_json(p.translation)},
          {"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  const auto& q = j.at("q");
  if (!q.is_array() || q.size() != 4) throw ConfigError("pose: q must be [w, x, y, z]");
  return Pose(Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()),
              vec3_from_json(j.at("t")));
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  try {
    CameraIntrinsics c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.k1 = j.value("k1", 0.0);
    c.k2 = j.value("k2", 0.0);
    c.p1 = j.value("p1", 0.0);
    c.p2 = j.value("p2", 0.0);
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("intrinsics: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json to_json(const CameraIntrinsics& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"k1", c.k1},        {"k2", c.k2},
          {"p1", c.p1}, {"p2", c.p2}, {"width", c.width},       {"height", c.height}};
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  return intrinsics_from_json(read_json(path));
}

CheckerboardAnnotation annotation_from_json(const nlohmann::json& j) {
  CheckerboardAnnotation ann;
  try {
    for (const auto& c : j.at("corners3d")) ann.corners3d.push_back(vec3_from_json(c));
    if (j.contains("frames")) {
      for (const auto& f : j.at("frames")) {
        std::vector<PixelPoint> px;
        for (const auto& c : f.at("corners2d")) {
          if (!c.is_array() || c.size() != 2) throw ConfigError("corners2d entries must be [u, v]");
          px.emplace_back(c[0].get<double>(), c[1].get<double>());
        }
        ann.corners2d[f.at("frame").get<int>()] = std::move(px);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("annotation: ") + e.what());
  }
  return ann;
}

nlohmann::json to_json(const CheckerboardAnnotation& ann) {
  nlohmann::json j;
  j["corners3d"] = nlohmann::json::array();
  for (const auto& c : ann.corners3d) j["corners3d"].push_back(to_json(c));
  j["frames"] = nlohmann::json::array();
  for (const auto& [frame, px] : ann.corners2d) {
    nlohmann::json f{{"frame", frame}, {"corners2d", nlohmann::json::array()}};
    for (const auto& p : px) f["corners2d"].push_back({p.x(), p.y()});
    j["frames"].push_back(std::move(f));
  }
  return j;
}

CheckerboardAnnotation read_annotation(const std::filesystem::path& path) {
  return annotation_from_json(read_json(path));
}

}  // namespace edgereg
