#include <doctest.h>

#include <fstream>
#include <sstream>

#include "edgereg/errors.hpp"
#include "edgereg/io.hpp"
#include "edgereg/point_cloud.hpp"
#include "test_util.hpp"

using namespace edgereg;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("read ascii ply fixture") {
  const auto dir = testing::scratch_dir("ply_ascii");
  write_text(dir / "a.ply",
             "ply\nformat ascii 1.0\ncomment hand written\n"
             "element vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
             "property float nx\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
             "1 2 3 0 255 0 0\n-1 0.5 2 0 0 255 0\n0 0 -4 0 0 0 255\n3 0 1 2\n");
  const auto c = read_cloud(dir / "a.ply");
  REQUIRE(c.size() == 3);
  CHECK(c.points[0] == Vec3(1, 2, 3));
  CHECK(c.points[1] == Vec3(-1, 0.5, 2));
  CHECK(c.points[2] == Vec3(0, 0, -4));
  REQUIRE(c.has_rgb());
  CHECK(c.rgb[1] == Rgb{0, 255, 0});
  CHECK_FALSE(c.has_intensity());
}

TEST_CASE("empty and malformed ply") {
  const auto dir = testing::scratch_dir("ply_bad");
  write_text(dir / "empty.ply", "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
  CHECK(read_cloud(dir / "empty.ply").empty());

  PointCloud c;
  for (int i = 0; i < 10; ++i) c.points.emplace_back(i, i, i);
  write_cloud(c, dir / "full.ply", CloudFormat::kPlyBinary);
  auto bytes = slurp(dir / "full.ply");
  write_text(dir / "trunc.ply", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_cloud(dir / "trunc.ply"), ParseError);

  write_text(dir / "be.ply", "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(read_cloud(dir / "be.ply"), UnsupportedFormat);
  write_text(dir / "junk.txt", "hello");
  CHECK_THROWS_AS(read_cloud(dir / "junk.txt"), UnsupportedFormat);
  write_text(dir / "badnum.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\nabc\n");
  CHECK_THROWS_AS(read_cloud(dir / "badnum.ply"), ParseError);
  CHECK_THROWS_AS(read_cloud(dir / "missing.ply"), IoError);
}

TEST_CASE("binary ply roundtrip is bit exact and deterministic") {
  const auto dir = testing::scratch_dir("ply_rt");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  std::uniform_real_distribution<float> ui(0, 1);
  PointCloud c;
  for (int i = 0; i < 1000; ++i) {
    c.points.emplace_back(u(rng), u(rng), u(rng));
    c.intensity.push_back(ui(rng));
    c.rgb.push_back(Rgb{std::uint8_t(i % 256), std::uint8_t((i * 7) % 256), std::uint8_t((i * 13) % 256)});
    c.scan_id.push_back(i % 5);
  }
  write_cloud(c, dir / "a.ply", CloudFormat::kPlyBinary);
  const auto back = read_cloud(dir / "a.ply");
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.points[i] == c.points[i]);
  }
  CHECK(back.intensity == c.intensity);
  CHECK(back.rgb == c.rgb);
  CHECK(back.scan_id == c.scan_id);
  write_cloud(back, dir / "b.ply", CloudFormat::kPlyBinary);
  CHECK(slurp(dir / "a.ply") == slurp(dir / "b.ply"));
  CHECK(slurp(dir / "a.ply").find("property uchar red") != std::string::npos);

  // ASCII PLY and PCD keep full precision too.
  for (auto fmt : {CloudFormat::kPlyAscii, CloudFormat::kPcdAscii}) {
    write_cloud(c, dir / "c.txt", fmt);
    const auto t = read_cloud(dir / "c.txt");
    REQUIRE(t.size() == c.size());
    bool same = true;
    for (std::size_t i = 0; i < c.size(); ++i) same &= t.points[i] == c.points[i];
    CHECK(same);
    CHECK(t.intensity == c.intensity);
    CHECK(t.rgb == c.rgb);
    CHECK(t.scan_id == c.scan_id);
  }
}

TEST_CASE("read pcd fixture") {
  const auto dir = testing::scratch_dir("pcd");
  write_text(dir / "a.pcd",
             "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z intensity normal\nSIZE 4 4 4 4 4\nTYPE F F F F F\n"
             "COUNT 1 1 1 1 3\nWIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\n1 2 3 0.5 0 0 1\n4 5 6 0.25 1 0 0\n");
  const auto c = read_cloud(dir / "a.pcd");
  REQUIRE(c.size() == 2);
  CHECK(c.points[1] == Vec3(4, 5, 6));
  CHECK(c.intensity[0] == 0.5f);
  write_text(dir / "b.pcd", "VERSION 0.7\nFIELDS x y z\nPOINTS 1\nDATA binary\n");
  CHECK_THROWS_AS(read_cloud(dir / "b.pcd"), UnsupportedFormat);
}

TEST_CASE("cloud validation") {
  PointCloud c;
  c.points.resize(2);
  c.intensity = {0.5f};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.intensity = {0.5f, 1.5f};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("trajectory parsing") {
  const auto dir = testing::scratch_dir("traj");
  write_text(dir / "a.txt", "# header\n0.0 0 0 0 0 0 0 1\n\n1.5 1 2 3 0 0 0 1.0001\n");
  const auto t = read_trajectory(dir / "a.txt");
  REQUIRE(t.size() == 2);
  CHECK(t[0].timestamp == 0.0);
  CHECK(t[0].camera_to_world.translation.norm() == 0.0);
  CHECK(t[0].camera_to_world.rotation.w() == 1.0);
  CHECK(std::abs(t[1].camera_to_world.rotation.norm() - 1.0) < 1e-12);

  write_text(dir / "dup.txt", "1 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n");
  CHECK_THROWS_AS(read_trajectory(dir / "dup.txt"), NonMonotonicTimestamps);
  write_text(dir / "short.txt", "1 0 0 0 0 0 1\n");
  CHECK_THROWS_AS(read_trajectory(dir / "short.txt"), ParseError);
}

TEST_CASE("trajectory roundtrip") {
  const auto dir = testing::scratch_dir("traj_rt");
  std::mt19937_64 rng(2);
  std::vector<TrajectoryEntry> traj;
  double ts = 1e9;
  for (int i = 0; i < 200; ++i) {
    ts += 0.0333333333333;
    traj.push_back({ts, testing::random_pose(rng)});
  }
  write_trajectory(traj, dir / "t.txt");
  const auto back = read_trajectory(dir / "t.txt");
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].timestamp == traj[i].timestamp);
    const Vec3 p = testing::random_vec(rng, 10.0);
    CHECK((back[i].camera_to_world.apply(p) - traj[i].camera_to_world.apply(p)).norm() < 1e-9);
  }
}

TEST_CASE("intrinsics and annotation config") {
  const auto dir = testing::scratch_dir("cfg");
  CameraIntrinsics c;
  c.k1 = -0.1;
  write_json(to_json(c), dir / "intr.json");
  const auto back = read_intrinsics(dir / "intr.json");
  CHECK(back.k1 == -0.1);
  CHECK(back.width == 640);

  CheckerboardAnnotation ann;
  ann.corners3d = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  ann.corners2d[3] = {PixelPoint(1, 2), PixelPoint(3, 4), PixelPoint(5, 6), PixelPoint(7, 8)};
  write_json(to_json(ann), dir / "board.json");
  const auto a2 = read_annotation(dir / "board.json");
  CHECK(a2.corners3d == ann.corners3d);
  CHECK(a2.corners2d.at(3) == ann.corners2d.at(3));

  write_text(dir / "bad.json", "{\"fx\": 1}");
  CHECK_THROWS_AS(read_intrinsics(dir / "bad.json"), ConfigError);
  write_text(dir / "broken.json", "{");
  CHECK_THROWS_AS(read_json(dir / "broken.json"), ParseError);
}
