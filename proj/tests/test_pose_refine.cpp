#include <doctest.h>

#include <random>

#include "edgereg/errors.hpp"
#include "edgereg/pose_refine.hpp"
#include "scenes.hpp"
#include "test_util.hpp"

using namespace edgereg;

namespace {

Edge3D segment(const Vec3& a, const Vec3& b) {
  Edge3D e;
  e.a = a;
  e.b = b;
  e.direction = (b - a).normalized();
  return e;
}

struct CornerFixture {
  Scene scene;
  std::vector<Edge3D> edges3d;
  CameraIntrinsics intr;
  Pose gt = testing::corner_view();

  explicit CornerFixture(std::uint64_t seed) : scene(gen_scene(testing::closed_corner_spec(seed))) {
    const auto map = VoxelMap::build(scene.cloud.points);
    edges3d = extract_edges3d(map, full_roi(map));
  }

  EdgeMap2D raw_edges2d(double noise_px, std::uint64_t seed) const {
    RenderOptions ro;
    ro.noise_px = noise_px;
    ro.rgb = false;
    ro.seed = seed;
    return render_frame(scene, gt, intr, ro).edges;
  }
  EdgeMap2D edges2d(double noise_px, std::uint64_t seed) const {
    return refine_normals(raw_edges2d(noise_px, seed), 5.0, true);
  }
};

}  // namespace

TEST_CASE("sample_edges examples") {
  CHECK(sample_edges({}, 0.25).empty());
  const auto s = sample_edges({segment(Vec3::Zero(), Vec3(1, 0, 0))}, 0.25);
  REQUIRE(s.size() == 5);
  CHECK(s.back().x.isApprox(Vec3(1, 0, 0)));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].x.x() == doctest::Approx(0.25 * static_cast<double>(i)));
    CHECK(s[i].direction.isApprox(Vec3::UnitX()));
  }
  const auto t = sample_edges({segment(Vec3::Zero(), Vec3(0, 0.1, 0))}, 0.25);
  REQUIRE(t.size() == 2);
  CHECK(t[1].x.isApprox(Vec3(0, 0.1, 0)));
  CHECK(sample_edges({segment(Vec3::Zero(), Vec3(1.1, 0, 0))}, 0.25).size() == 6);
  CHECK_THROWS_AS(sample_edges({}, 0.0), InvalidArgument);
}

TEST_CASE("associate examples") {
  const CameraIntrinsics intr;
  const Pose pose;
  RefineConfig cfg;

  SUBCASE("round trip matches each sample to its own pixel") {
    const auto samples = sample_edges({segment(Vec3(-1, -0.5, 4), Vec3(1, 0.7, 5)), segment(Vec3(0.5, -1, 3), Vec3(0.6, 1, 3.5))}, 0.05);
    EdgeMap2D em;
    em.width = intr.width;
    em.height = intr.height;
    for (const auto& s : samples) {
      const Vec3 pc = pose.apply(s.x);
      const Vec2 d = (project(intr, pc + 1e-4 * s.direction) - project(intr, pc)).normalized();
      em.push_back(project(intr, pc), Vec2(-d.y(), d.x()));
    }
    const auto corr = associate(samples, pose, intr, em, cfg);
    REQUIRE(corr.size() == samples.size());
    for (std::size_t i = 0; i < corr.size(); ++i) {
      CHECK((corr[i].y - project(intr, samples[i].x)).norm() == 0.0);
      CHECK(point_line_residual(corr[i], pose, intr) == 0.0);
      const double z = samples[i].x.z();
      const double sl = cfg.noise.sigma_lidar * intr.fx / z;
      CHECK(corr[i].weight == doctest::Approx(1.0 / (cfg.noise.sigma_cam * cfg.noise.sigma_cam + sl * sl)));
    }
  }

  SUBCASE("angle gate rejects a vertical line near a horizontal edge") {
    EdgeMap2D em;
    em.width = intr.width;
    em.height = intr.height;
    for (int x = 200; x <= 440; ++x) em.push_back(Vec2(x, 245), Vec2(0, 1));
    // vertical 3D line through the principal point, 5 px from the 2D line
    const auto samples = sample_edges({segment(Vec3(0, -0.2, 4), Vec3(0, 0.2, 4))}, 0.01);
    CHECK(associate(samples, pose, intr, em, cfg).empty());
  }

  SUBCASE("samples behind the camera or off-image are excluded") {
    EdgeMap2D em;
    em.width = intr.width;
    em.height = intr.height;
    em.push_back(Vec2(320, 240), Vec2(1, 0));
    std::vector<EdgeSample> samples{{Vec3(0, 0, -3), Vec3::UnitY()}, {Vec3(10, 0, 1), Vec3::UnitY()},
                                    {Vec3(0, 0, 3), Vec3::UnitY()}};
    const auto corr = associate(samples, pose, intr, em, cfg);
    REQUIRE(corr.size() == 1);
    CHECK(corr[0].x.isApprox(Vec3(0, 0, 3)));
  }
}

TEST_CASE("residual Jacobian matches central differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CameraIntrinsics intr;
  intr.k1 = -0.1;
  intr.k2 = 0.02;
  intr.p1 = 0.001;
  intr.p2 = -0.0005;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose = testing::random_pose(rng, 0.5, 0.5);
    Correspondence c;
    c.x = pose.inverse().apply(Vec3(u(rng), u(rng), 3.0 + u(rng)));
    c.y = Vec2(300 + 50 * u(rng), 250 + 50 * u(rng));
    const double ang = M_PI * u(rng);
    c.n = Vec2(std::cos(ang), std::sin(ang));
    c.weight = 1.0;
    const auto j = point_line_jacobian(c, pose, intr);
    for (int k = 0; k < 6; ++k) {
      const double h = 1e-6;
      Vec6 d = Vec6::Zero();
      d[k] = h;
      const double fd =
          (point_line_residual(c, retract(pose, d), intr) - point_line_residual(c, retract(pose, -d), intr)) / (2 * h);
      const double scale = std::max(1.0, std::abs(fd));
      CHECK(std::abs(j(0, k) - fd) / scale <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked == 600);
}

TEST_CASE("huber") {
  CHECK(huber(1.0, 2.0) == 0.5);
  CHECK(huber(-3.0, 2.0) == doctest::Approx(4.0));
  CHECK(huber(2.0, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("refine from ground truth is a fixed point") {
  const CornerFixture fx(3);
  REQUIRE(fx.edges3d.size() == 5);
  const auto em = fx.raw_edges2d(0.0, 0);
  // exact edges: the optimum coincides with the rendering pose
  const auto r = refine_pose(fx.gt, fx.scene.edges, em, fx.intr);
  CHECK(r.status == RefineStatus::Converged);
  REQUIRE(r.iterations.size() == 1);
  CHECK(r.iterations[0].delta_rot < 1e-6);
  CHECK(r.iterations[0].delta_trans < 1e-6);
  CHECK(r.iterations[0].mean_abs_residual_px < 0.1);
}

TEST_CASE("refine recovers perturbed poses") {
  const CornerFixture fx(4);
  int ok = 0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    const auto em = fx.edges2d(1.0, 100 + seed);
    const Pose init = perturb_pose(fx.gt, 1.0, 0.02, 500 + seed);
    const auto r = refine_pose(init, fx.edges3d, em, fx.intr);
    CHECK(r.iterations.size() <= 3);
    const auto e = pose_error(r.pose, fx.gt);
    if (e.rot_deg <= 0.2 && e.trans_m <= 0.01) ++ok;
    for (const auto& it : r.iterations)
      for (std::size_t k = 1; k < it.cost_trace.size(); ++k) CHECK(it.cost_trace[k] <= it.cost_trace[k - 1]);
  }
  CHECK(ok >= 18);
}

TEST_CASE("degenerate and starved problems return the input pose unchanged") {
  const CameraIntrinsics intr;
  const Pose gt = testing::corner_view();
  const Pose init = perturb_pose(gt, 0.5, 0.01, 9);

  SUBCASE("single 3D line") {
    Scene sc;
    sc.edges.push_back(segment(Vec3(0, 0, 0), Vec3(0, 0, 3)));
    RenderOptions ro;
    ro.rgb = false;
    const auto em = render_frame(sc, gt, intr, ro).edges;
    REQUIRE(em.size() > 100);
    const auto r = refine_pose(init, sc.edges, em, intr);
    CHECK(r.status == RefineStatus::Degenerate);
    CHECK(r.pose.rotation.coeffs() == init.rotation.coeffs());
    CHECK(r.pose.translation == init.translation);
  }

  SUBCASE("three concurrent edges of a bare room corner") {
    const auto sc = gen_scene(room_spec(6, 5, 3, 400, 0.0, 1));
    RenderOptions ro;
    ro.rgb = false;
    const auto em = render_frame(sc, gt, intr, ro).edges;
    const auto r = refine_pose(init, sc.edges, em, intr);
    CHECK(r.status == RefineStatus::Degenerate);
    CHECK(r.condition_number > 1e6);
    CHECK(r.pose.translation == init.translation);
  }

  SUBCASE("no edge pixels") {
    EdgeMap2D em;
    em.width = intr.width;
    em.height = intr.height;
    const auto r = refine_pose(init, {segment(Vec3(0, 0, 0), Vec3(0, 0, 3))}, em, intr);
    CHECK(r.status == RefineStatus::InsufficientMatches);
    CHECK(r.pose.rotation.coeffs() == init.rotation.coeffs());
    CHECK(r.pose.translation == init.translation);
  }
}

TEST_CASE("refine is deterministic") {
  const CornerFixture fx(5);
  const auto em = fx.edges2d(1.0, 7);
  const Pose init = perturb_pose(fx.gt, 1.0, 0.02, 7);
  const auto a = refine_pose(init, fx.edges3d, em, fx.intr);
  const auto b = refine_pose(init, fx.edges3d, em, fx.intr);
  CHECK(a.pose.rotation.coeffs() == b.pose.rotation.coeffs());
  CHECK(a.pose.translation == b.pose.translation);
  CHECK(a.status == b.status);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) CHECK(a.iterations[i].cost_trace == b.iterations[i].cost_trace);
}

TEST_CASE("refine config validation") {
  RefineConfig c;
  CHECK_NOTHROW(c.validate());
  c.max_outer_iters = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RefineConfig{};
  c.noise.sigma_cam = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RefineConfig{};
  c.huber_delta = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
