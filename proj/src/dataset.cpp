#include "edgereg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "edgereg/errors.hpp"

namespace edgereg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RgbImage box_blur(const RgbImage& img, int r) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      int acc[3] = {0, 0, 0}, n = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const Rgb c = img.at(std::clamp(x + dx, 0, img.width - 1), std::clamp(y + dy, 0, img.height - 1));
          acc[0] += c.r;
          acc[1] += c.g;
          acc[2] += c.b;
          ++n;
        }
      out.set(x, y, Rgb{static_cast<std::uint8_t>(acc[0] / n), static_cast<std::uint8_t>(acc[1] / n),
                        static_cast<std::uint8_t>(acc[2] / n)});
    }
  return out;
}

std::vector<Pose> arc_cameras(int frames, const Vec3& eye, const Vec3& target, double spread) {
  std::vector<Pose> out;
  for (int k = 0; k < frames; ++k) {
    const double a = frames > 1 ? 2.0 * M_PI * k / frames : 0.0;
    const Vec3 e = eye + spread * Vec3(std::cos(a), 0.6 * std::sin(a), 0.3 * std::sin(2 * a));
    out.push_back(look_at(e, target));
  }
  return out;
}

void keys(const json& j, const std::string& what, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(what + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(what + ": unknown key '" + k + "'");
}

double num(const json& j, const char* k, double def) {
  if (!j.contains(k)) return def;
  if (!j[k].is_number()) throw ConfigError(std::string(k) + ": expected a number");
  return j[k].get<double>();
}

}  // namespace

DatasetSpec default_dataset_spec(int frames, std::uint64_t seed) {
  DatasetSpec d;
  d.seed = seed;
  d.scene = room_spec(6.0, 5.0, 3.0, 400.0, 0.005, seed, true);
  BoardSpec board;
  Mat3 r;
  r.col(0) = Vec3::UnitY();
  r.col(1) = Vec3::UnitZ();
  r.col(2) = Vec3::UnitX();
  board.board_to_world = Pose(r, Vec3(0.005, 1.5, 1.0));
  d.scene.boards.push_back(board);
  d.scene.scan_poses = {Pose(Mat3::Identity(), -Vec3(3.0, 2.5, 1.2)), Pose(Mat3::Identity(), -Vec3(4.5, 3.5, 1.6))};
  d.cameras = arc_cameras(frames, Vec3(4.5, 3.8, 1.5), Vec3(0.3, 0.8, 1.4), 0.3);
  return d;
}

DatasetSpec dataset_spec_from_json(const json& j) {
  keys(j, "synth", {"frames", "seed", "room", "noise_sigma", "boxes", "board", "scan_origins", "camera",
                    "perturb_rot_deg", "perturb_trans_m", "corner_noise_px", "intrinsics", "blurred_frames",
                    "missing_frames"});
  const int frames = j.contains("frames") ? j["frames"].get<int>() : 10;
  if (frames < 0) throw ConfigError("frames must be >= 0");
  const auto seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : 0;
  DatasetSpec d = default_dataset_spec(frames, seed);
  if (j.contains("room")) {
    const auto& r = j["room"];
    keys(r, "room", {"w", "d", "h", "density", "ceiling"});
    const bool ceiling = r.contains("ceiling") ? r["ceiling"].get<bool>() : true;
    auto boards = d.scene.boards;
    auto scans = d.scene.scan_poses;
    d.scene = room_spec(num(r, "w", 6), num(r, "d", 5), num(r, "h", 3), num(r, "density", 400), 0.005, seed, ceiling);
    d.scene.boards = boards;
    d.scene.scan_poses = scans;
  }
  d.scene.noise_sigma = num(j, "noise_sigma", d.scene.noise_sigma);
  if (j.contains("boxes")) {
    for (const auto& b : j["boxes"]) {
      keys(b, "box", {"center", "size", "offsets", "density"});
      BoxSpec box;
      box.center = vec3_from_json(b.at("center"));
      box.size = vec3_from_json(b.at("size"));
      box.density = num(b, "density", 400);
      if (b.contains("offsets"))
        for (const auto& o : b["offsets"]) box.offsets.push_back(vec3_from_json(o));
      d.scene.boxes.push_back(box);
    }
  }
  if (j.contains("board")) {
    const auto& b = j["board"];
    if (b.is_null()) {
      d.scene.boards.clear();
    } else {
      keys(b, "board", {"pose", "nx", "ny", "square", "density"});
      BoardSpec& bs = d.scene.boards.at(0);
      if (b.contains("pose")) bs.board_to_world = pose_from_json(b["pose"]);
      if (b.contains("nx")) bs.nx = b["nx"].get<int>();
      if (b.contains("ny")) bs.ny = b["ny"].get<int>();
      bs.square = num(b, "square", bs.square);
      bs.density = num(b, "density", bs.density);
    }
  }
  if (j.contains("scan_origins")) {
    d.scene.scan_poses.clear();
    for (const auto& o : j["scan_origins"]) d.scene.scan_poses.push_back(Pose(Mat3::Identity(), -vec3_from_json(o)));
  }
  if (j.contains("camera")) {
    const auto& c = j["camera"];
    keys(c, "camera", {"eye", "target", "spread"});
    d.cameras = arc_cameras(frames, c.contains("eye") ? vec3_from_json(c["eye"]) : Vec3(4.5, 3.8, 1.5),
                            c.contains("target") ? vec3_from_json(c["target"]) : Vec3(0.3, 0.8, 1.4),
                            num(c, "spread", 0.3));
  }
  d.perturb_rot_deg = num(j, "perturb_rot_deg", d.perturb_rot_deg);
  d.perturb_trans_m = num(j, "perturb_trans_m", d.perturb_trans_m);
  d.corner_noise_px = num(j, "corner_noise_px", d.corner_noise_px);
  if (j.contains("intrinsics")) d.intr = intrinsics_from_json(j["intrinsics"]);
  if (j.contains("blurred_frames")) d.blurred_frames = j["blurred_frames"].get<std::vector<int>>();
  if (j.contains("missing_frames")) d.missing_frames = j["missing_frames"].get<std::vector<int>>();
  return d;
}

PipelineConfig synthetic_pipeline_defaults() {
  PipelineConfig cfg;
  cfg.roi.phi_scale = 200.0;
  cfg.edge2d.blur_threshold = 250.0;
  return cfg;
}

DatasetFiles write_dataset(const DatasetSpec& spec, const fs::path& dir, const PipelineConfig& base) {
  fs::create_directories(dir / "images");
  const Scene scene = gen_scene(spec.scene);
  DatasetFiles files;

  write_scans(scene.scans, dir / "scans.json");
  PointCloud merged;
  for (const auto& s : scene.scans) {
    PointCloud c;
    c.points = s.points;
    c.scan_id.assign(s.points.size(), s.scan_id);
    merged.append(c);
  }
  write_cloud(merged, dir / "map.ply");
  write_json(to_json(spec.intr), dir / "intrinsics.json");

  const std::set<int> blurred(spec.blurred_frames.begin(), spec.blurred_frames.end());
  const std::set<int> missing(spec.missing_frames.begin(), spec.missing_frames.end());
  for (int f = 0; f < static_cast<int>(spec.cameras.size()); ++f) {
    const Pose& gt = spec.cameras[f];
    const double ts = 0.1 * f;
    files.gt.push_back({ts, gt.inverse()});
    const Pose init = perturb_pose(gt, spec.perturb_rot_deg, spec.perturb_trans_m, spec.seed * 1000003 + f);
    files.init.push_back({ts, init.inverse()});
    if (missing.count(f)) continue;
    RenderOptions ro;
    ro.seed = spec.seed + f;
    auto frame = render_frame(scene, gt, spec.intr, ro);
    if (blurred.count(f)) frame.rgb = box_blur(frame.rgb, 6);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", f);
    write_image(frame.rgb, dir / "images" / name);
  }
  write_trajectory(files.gt, dir / "trajectory_gt.txt");
  write_trajectory(files.init, dir / "trajectory_init.txt");
  if (!spec.scene.boards.empty()) {
    files.annotation = make_annotation(spec.scene.boards[0], spec.cameras, spec.intr, spec.corner_noise_px, spec.seed);
    write_json(to_json(files.annotation), dir / "board.json");
  }

  json cfg = to_json(base);
  cfg["paths"] = json{{"map", "map.ply"},
                      {"scans", "scans.json"},
                      {"images", "images"},
                      {"image_pattern", "%06d.png"},
                      {"trajectory", "trajectory_init.txt"},
                      {"intrinsics", "intrinsics.json"},
                      {"annotations", spec.scene.boards.empty() ? "" : "board.json"},
                      {"output_dir", "out"}};
  files.config = dir / "config.json";
  write_json(cfg, files.config);
  return files;
}

}  // namespace edgereg
