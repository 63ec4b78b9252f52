#include <doctest.h>

#include <algorithm>
#include <set>

#include "edgereg/errors.hpp"
#include "edgereg/synth.hpp"
#include "test_util.hpp"

using namespace edgereg;

namespace {

std::set<std::array<double, 3>> as_set(const std::vector<Vec3>& pts) {
  std::set<std::array<double, 3>> s;
  for (const auto& p : pts) s.insert({p.x(), p.y(), p.z()});
  return s;
}

// Distance from q to the segment a-b.
double seg_dist(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double t = std::clamp((q - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (a + t * d - q).norm();
}

}  // namespace

TEST_CASE("stratified plane sampling count") {
  SceneSpec s;
  s.planes.push_back(PlaneSpec{Vec3::Zero(), Vec3(2, 0, 0), Vec3(0, 2, 0), 100.0});
  const auto sc = gen_scene(s);
  CHECK(sc.cloud.size() == 400);
  CHECK(sc.cloud.intensity.size() == 400);
  CHECK(sc.edges.empty());
  s.planes[0].density = 0;
  CHECK_THROWS_AS(gen_scene(s), InvalidArgument);
  s.planes[0] = PlaneSpec{Vec3::Zero(), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  CHECK_THROWS_AS(gen_scene(s), InvalidArgument);
}

TEST_CASE("room has three analytic edges") {
  const auto sc = gen_scene(room_spec(6, 5, 3));
  REQUIRE(sc.edges.size() == 3);
  std::vector<double> lens;
  for (const auto& e : sc.edges) {
    lens.push_back(e.length());
    CHECK(std::abs(e.direction.dot(e.normals[0])) < 1e-12);
    CHECK(std::abs(e.direction.dot(e.normals[1])) < 1e-12);
  }
  std::sort(lens.begin(), lens.end());
  CHECK(lens[0] == doctest::Approx(3.0));
  CHECK(lens[1] == doctest::Approx(5.0));
  CHECK(lens[2] == doctest::Approx(6.0));
}

TEST_CASE("generation is reproducible per seed") {
  auto spec = room_spec(4, 4, 2.5, 200, 0.005, 42);
  spec.scan_poses = {look_at(Vec3(2, 2, 1), Vec3(0, 0, 1))};
  const auto a = gen_scene(spec), b = gen_scene(spec);
  CHECK(a.cloud.points == b.cloud.points);
  CHECK(a.scans[0].points == b.scans[0].points);
  spec.seed = 43;
  CHECK(gen_scene(spec).cloud.points != a.cloud.points);
}

TEST_CASE("moving box: scans differ exactly on box surfaces") {
  SceneSpec s;
  s.planes.push_back(PlaneSpec{Vec3(-5, -2, -1), Vec3(0, 4, 0), Vec3(0, 0, 2)});  // behind the scanner
  BoxSpec box;
  box.center = Vec3(3, 0, 0);
  box.size = Vec3(0.5, 0.5, 0.5);
  box.offsets = {Vec3::Zero(), Vec3(1.5, 1.0, 0)};
  s.boxes.push_back(box);
  s.scan_poses = {Pose::identity(), Pose::identity()};
  const auto sc = gen_scene(s);
  const auto s0 = as_set(sc.scans[0].points), s1 = as_set(sc.scans[1].points);
  auto on_box = [](const std::array<double, 3>& p, const Vec3& c) {
    const Vec3 q = Vec3(p[0], p[1], p[2]) - c;
    return std::abs(q.x()) <= 0.28 && std::abs(q.y()) <= 0.28 && std::abs(q.z()) <= 0.28;
  };
  std::size_t diff = 0;
  for (const auto& p : s0) {
    if (s1.count(p)) continue;
    ++diff;
    CHECK(on_box(p, Vec3(3, 0, 0)));
  }
  for (const auto& p : s1) {
    if (s0.count(p)) continue;
    ++diff;
    CHECK(on_box(p, Vec3(4.5, 1.0, 0)));
  }
  CHECK(diff > 0);
  // the plane is seen identically from both scans
  std::size_t plane0 = 0, plane1 = 0, plane_all = 0;
  for (const auto& p : s0) plane0 += p[0] < -4;
  for (const auto& p : s1) plane1 += p[0] < -4;
  for (const auto& p : sc.cloud.points) plane_all += p.x() < -4;
  CHECK(plane0 == plane_all);
  CHECK(plane1 == plane_all);
}

TEST_CASE("render: noiseless edge points lie on projected analytic edges") {
  const auto sc = gen_scene(room_spec(6, 5, 3, 50));
  const CameraIntrinsics intr;
  const Pose pose = look_at(Vec3(4, 3.5, 1.6), Vec3(0, 0, 0.8));
  RenderOptions opts;
  opts.rgb = false;
  const auto f = render_frame(sc, pose, intr, opts);
  REQUIRE(f.edges.size() > 100);
  CHECK(f.visible_edges.size() == 3);
  for (std::size_t i = 0; i < f.edges.size(); ++i) {
    double best = 1e9;
    for (const auto& e : sc.edges) {
      best = std::min(best, seg_dist(f.edges.pixels[i], project(intr, pose.apply(e.a)), project(intr, pose.apply(e.b))));
    }
    CHECK(best < 0.5);
    CHECK(f.edges.normals[i].norm() == doctest::Approx(1.0));
    CHECK(std::abs(f.edges.normals[i].dot(f.edges.directions[i])) < 1e-12);
  }
}

TEST_CASE("render: edges behind a wall produce no pixels") {
  auto spec = room_spec(6, 5, 3, 50);
  // opaque panel between camera and the whole room
  spec.planes.push_back(PlaneSpec{Vec3(3.0, -2, -1), Vec3(0, 0, 6), Vec3(0, 10, 0), 50});
  const auto sc = gen_scene(spec);
  RenderOptions opts;
  opts.rgb = false;
  const auto f = render_frame(sc, look_at(Vec3(5, 2.5, 1.5), Vec3(0, 2.5, 1.0)), CameraIntrinsics{}, opts);
  for (const auto& e : f.visible_edges) CHECK(std::min(e.a.x(), e.b.x()) >= 3.0 - 1e-9);
  CHECK(f.edges.empty());
}

TEST_CASE("render: empty scene gives an empty frame") {
  const auto sc = gen_scene(SceneSpec{});
  CameraIntrinsics intr;
  intr.width = 64;
  intr.height = 48;
  intr.cx = 32;
  intr.cy = 24;
  const auto f = render_frame(sc, Pose::identity(), intr);
  CHECK(f.edges.empty());
  CHECK(f.rgb.width == 64);
  CHECK(std::all_of(f.rgb.data.begin(), f.rgb.data.end(), [](std::uint8_t v) { return v == 0; }));
}

TEST_CASE("rgb render shows the checkerboard") {
  SceneSpec s;
  BoardSpec b;
  b.board_to_world = Pose(Mat3::Identity(), Vec3(-0.35, -0.25, 2.0));
  s.boards.push_back(b);
  const auto sc = gen_scene(s);
  const CameraIntrinsics intr;
  const auto f = render_frame(sc, Pose::identity(), intr);
  // square (0,0) is dark, (1,0) light
  const auto p0 = project(intr, Vec3(-0.30, -0.20, 2.0));
  const auto p1 = project(intr, Vec3(-0.20, -0.20, 2.0));
  CHECK(f.rgb.at(static_cast<int>(p0.x()), static_cast<int>(p0.y())).r < 50);
  CHECK(f.rgb.at(static_cast<int>(p1.x()), static_cast<int>(p1.y())).r > 200);
  CHECK(board_corners(b).size() == 6 * 4);
}

TEST_CASE("perturb_pose") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Pose p = testing::random_pose(rng);
    CHECK(perturb_pose(p, 0, 0, 9).translation == p.translation);
    const Pose q = perturb_pose(p, 1.0, 0.0, i);
    const auto err = pose_error(p, q);
    CHECK(std::abs(err.rot_deg - 1.0) < 1e-9);
    CHECK(err.trans_m < 1e-12);
    const Pose r = perturb_pose(p, 1.0, 0.02, i);
    CHECK(std::abs(pose_error(p, r).trans_m - 0.02) < 1e-12);
    const Pose r2 = perturb_pose(p, 1.0, 0.02, i);
    CHECK(r.translation == r2.translation);
    CHECK(r.rotation.coeffs() == r2.rotation.coeffs());
  }
  CHECK_THROWS_AS(perturb_pose(Pose{}, -1, 0, 0), InvalidArgument);
}

TEST_CASE("annotation corners project exactly") {
  BoardSpec b;
  b.board_to_world = Pose(Mat3::Identity(), Vec3(-0.3, -0.2, 2.5));
  const CameraIntrinsics intr;
  const std::vector<Pose> frames{Pose::identity(), look_at(Vec3(0.2, 0, 0), Vec3(0, 0, 2.5), -Vec3::UnitY())};
  const auto ann = make_annotation(b, frames, intr);
  REQUIRE(ann.corners2d.size() == 2);
  for (const auto& [f, px] : ann.corners2d) {
    REQUIRE(px.size() == ann.corners3d.size());
    for (std::size_t i = 0; i < px.size(); ++i) CHECK((px[i] - project(intr, frames[f].apply(ann.corners3d[i]))).norm() < 1e-12);
  }
}
