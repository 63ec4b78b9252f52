#include "edgereg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "edgereg/errors.hpp"

namespace edgereg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(section + ": unknown key '" + k + "'");
}

template <typename T>
void get(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(section + "." + key + ": expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(section + "." + key + ": expected an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(section + "." + key + ": expected a number");
  } else {
    if (!v.is_string()) throw ConfigError(section + "." + key + ": expected a string");
  }
  out = v.get<T>();
}

void get_path(const json& j, const char* key, fs::path& out, const fs::path& base) {
  std::string s;
  get(j, key, s, "paths");
  if (s.empty()) return;
  const fs::path p(s);
  out = p.is_absolute() || base.empty() ? p : base / p;
}

std::string format_index(const std::string& pattern, int frame) {
  char buf[512];
  const int n = std::snprintf(buf, sizeof(buf), pattern.c_str(), frame);
  if (n < 0 || n >= static_cast<int>(sizeof(buf))) throw ConfigError("image_pattern produced an invalid name");
  return buf;
}

double mean_first(const RefineResult& r) {
  return r.iterations.empty() ? 0.0 : r.iterations.front().mean_abs_residual_px;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(leaf_size > 0.0 && root_size >= leaf_size)) throw ConfigError("voxel: need 0 < leaf_size <= root_size");
  const double ratio = root_size / leaf_size;
  const double lg = std::log2(ratio);
  if (std::abs(lg - std::round(lg)) > 1e-9) throw ConfigError("voxel: root_size / leaf_size must be a power of two");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(roi.fov_widen >= 1.0 && roi.max_dist > 0.0 && roi.phi_scale >= 1.0 && roi.dilation >= 0))
    throw ConfigError("roi: need fov_widen >= 1, max_dist > 0, phi_scale >= 1, dilation >= 0");
  if (!(edge2d.canny.low >= 0.0 && edge2d.canny.low <= edge2d.canny.high && edge2d.canny.sigma >= 0.0))
    throw ConfigError("edge2d: need 0 <= low <= high and sigma >= 0");
  if (!(edge2d.blur_threshold >= 0.0 && edge2d.normal_radius >= 1.0))
    throw ConfigError("edge2d: need blur_threshold >= 0 and normal_radius >= 1");
  if (!(colorize.zbuf_res > 0.0 && colorize.depth_slack >= 0.0))
    throw ConfigError("colorize: need zbuf_res > 0 and depth_slack >= 0");
  if (!(removal.incidence_margin >= 0.0 && removal.min_scans_seen_through >= 1))
    throw ConfigError("removal: need incidence_margin >= 0 and min_scans_seen_through >= 1");
  edge3d.validate();
  refine.validate();
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  check_keys(j, "config", {"paths", "voxel", "removal", "roi", "edge3d", "edge2d", "refine", "colorize", "skip_removal",
                           "skip_roi", "jobs"});
  get(j, "skip_removal", c.skip_removal, "config");
  get(j, "skip_roi", c.skip_roi, "config");
  get(j, "jobs", c.jobs, "config");
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    check_keys(p, "paths", {"map", "scans", "images", "image_pattern", "trajectory", "intrinsics", "annotations",
                            "output_dir"});
    get_path(p, "map", c.paths.map, base);
    get_path(p, "scans", c.paths.scans, base);
    get_path(p, "images", c.paths.images, base);
    get(p, "image_pattern", c.paths.image_pattern, "paths");
    get_path(p, "trajectory", c.paths.trajectory, base);
    get_path(p, "intrinsics", c.paths.intrinsics, base);
    get_path(p, "annotations", c.paths.annotations, base);
    get_path(p, "output_dir", c.paths.output_dir, base);
  }
  if (j.contains("voxel")) {
    const auto& v = j["voxel"];
    check_keys(v, "voxel", {"root_size", "leaf_size"});
    get(v, "root_size", c.root_size, "voxel");
    get(v, "leaf_size", c.leaf_size, "voxel");
  }
  if (j.contains("removal")) {
    const auto& r = j["removal"];
    check_keys(r, "removal", {"incidence_margin", "min_scans_seen_through"});
    get(r, "incidence_margin", c.removal.incidence_margin, "removal");
    get(r, "min_scans_seen_through", c.removal.min_scans_seen_through, "removal");
  }
  if (j.contains("roi")) {
    const auto& r = j["roi"];
    check_keys(r, "roi", {"fov_widen", "max_dist", "phi_scale", "dilation"});
    get(r, "fov_widen", c.roi.fov_widen, "roi");
    get(r, "max_dist", c.roi.max_dist, "roi");
    get(r, "phi_scale", c.roi.phi_scale, "roi");
    get(r, "dilation", c.roi.dilation, "roi");
  }
  if (j.contains("edge3d")) {
    const auto& e = j["edge3d"];
    check_keys(e, "edge3d", {"planarity_ratio", "min_points", "angle_min_deg", "angle_max_deg", "min_edge_len",
                             "max_lambda0", "merge_angle_deg", "dedup_angle_deg"});
    get(e, "planarity_ratio", c.edge3d.planarity_ratio, "edge3d");
    get(e, "min_points", c.edge3d.min_points, "edge3d");
    get(e, "angle_min_deg", c.edge3d.angle_min_deg, "edge3d");
    get(e, "angle_max_deg", c.edge3d.angle_max_deg, "edge3d");
    get(e, "min_edge_len", c.edge3d.min_edge_len, "edge3d");
    get(e, "max_lambda0", c.edge3d.max_lambda0, "edge3d");
    get(e, "merge_angle_deg", c.edge3d.merge_angle_deg, "edge3d");
    get(e, "dedup_angle_deg", c.edge3d.dedup_angle_deg, "edge3d");
  }
  if (j.contains("edge2d")) {
    const auto& e = j["edge2d"];
    check_keys(e, "edge2d", {"low", "high", "sigma", "blur_threshold", "normal_radius", "snap"});
    get(e, "low", c.edge2d.canny.low, "edge2d");
    get(e, "high", c.edge2d.canny.high, "edge2d");
    get(e, "sigma", c.edge2d.canny.sigma, "edge2d");
    get(e, "blur_threshold", c.edge2d.blur_threshold, "edge2d");
    get(e, "normal_radius", c.edge2d.normal_radius, "edge2d");
    get(e, "snap", c.edge2d.snap, "edge2d");
  }
  bool spacing_set = false;
  if (j.contains("refine")) {
    const auto& r = j["refine"];
    check_keys(r, "refine", {"max_outer_iters", "max_inner_iters", "sample_spacing", "max_px_dist", "max_angle_deg",
                             "huber_delta", "min_correspondences", "degeneracy_cond_max", "sigma_lidar", "sigma_cam"});
    get(r, "max_outer_iters", c.refine.max_outer_iters, "refine");
    get(r, "max_inner_iters", c.refine.max_inner_iters, "refine");
    spacing_set = r.contains("sample_spacing");
    get(r, "sample_spacing", c.refine.sample_spacing, "refine");
    get(r, "max_px_dist", c.refine.max_px_dist, "refine");
    get(r, "max_angle_deg", c.refine.max_angle_deg, "refine");
    get(r, "huber_delta", c.refine.huber_delta, "refine");
    get(r, "min_correspondences", c.refine.min_correspondences, "refine");
    get(r, "degeneracy_cond_max", c.refine.degeneracy_cond_max, "refine");
    get(r, "sigma_lidar", c.refine.noise.sigma_lidar, "refine");
    get(r, "sigma_cam", c.refine.noise.sigma_cam, "refine");
  }
  if (!spacing_set) c.refine.sample_spacing = c.leaf_size;
  if (j.contains("colorize")) {
    const auto& r = j["colorize"];
    check_keys(r, "colorize", {"zbuf_res", "depth_slack"});
    get(r, "zbuf_res", c.colorize.zbuf_res, "colorize");
    get(r, "depth_slack", c.colorize.depth_slack, "colorize");
  }
  c.validate();
  return c;
}

json to_json(const PipelineConfig& c) {
  auto ps = [](const fs::path& p) { return p.string(); };
  return json{
      {"paths",
       {{"map", ps(c.paths.map)},
        {"scans", ps(c.paths.scans)},
        {"images", ps(c.paths.images)},
        {"image_pattern", c.paths.image_pattern},
        {"trajectory", ps(c.paths.trajectory)},
        {"intrinsics", ps(c.paths.intrinsics)},
        {"annotations", ps(c.paths.annotations)},
        {"output_dir", ps(c.paths.output_dir)}}},
      {"voxel", {{"root_size", c.root_size}, {"leaf_size", c.leaf_size}}},
      {"removal",
       {{"incidence_margin", c.removal.incidence_margin}, {"min_scans_seen_through", c.removal.min_scans_seen_through}}},
      {"roi",
       {{"fov_widen", c.roi.fov_widen},
        {"max_dist", c.roi.max_dist},
        {"phi_scale", c.roi.phi_scale},
        {"dilation", c.roi.dilation}}},
      {"edge3d",
       {{"planarity_ratio", c.edge3d.planarity_ratio},
        {"min_points", c.edge3d.min_points},
        {"angle_min_deg", c.edge3d.angle_min_deg},
        {"angle_max_deg", c.edge3d.angle_max_deg},
        {"min_edge_len", c.edge3d.min_edge_len},
        {"max_lambda0", c.edge3d.max_lambda0},
        {"merge_angle_deg", c.edge3d.merge_angle_deg},
        {"dedup_angle_deg", c.edge3d.dedup_angle_deg}}},
      {"edge2d",
       {{"low", c.edge2d.canny.low},
        {"high", c.edge2d.canny.high},
        {"sigma", c.edge2d.canny.sigma},
        {"blur_threshold", c.edge2d.blur_threshold},
        {"normal_radius", c.edge2d.normal_radius},
        {"snap", c.edge2d.snap}}},
      {"refine",
       {{"max_outer_iters", c.refine.max_outer_iters},
        {"max_inner_iters", c.refine.max_inner_iters},
        {"sample_spacing", c.refine.sample_spacing},
        {"max_px_dist", c.refine.max_px_dist},
        {"max_angle_deg", c.refine.max_angle_deg},
        {"huber_delta", c.refine.huber_delta},
        {"min_correspondences", c.refine.min_correspondences},
        {"degeneracy_cond_max", c.refine.degeneracy_cond_max},
        {"sigma_lidar", c.refine.noise.sigma_lidar},
        {"sigma_cam", c.refine.noise.sigma_cam}}},
      {"colorize", {{"zbuf_res", c.colorize.zbuf_res}, {"depth_slack", c.colorize.depth_slack}}},
      {"skip_removal", c.skip_removal},
      {"skip_roi", c.skip_roi},
      {"jobs", c.jobs}};
}

PipelineConfig read_pipeline_config(const fs::path& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

Viewpoint make_viewpoint(const PipelineConfig& cfg, const Pose& pose, const CameraIntrinsics& intr) {
  Viewpoint vp;
  vp.pose = pose;
  vp.intrinsics = intr;
  vp.fov_widen = cfg.roi.fov_widen;
  vp.max_dist = cfg.roi.max_dist;
  vp.phi_scale = cfg.roi.phi_scale;
  vp.dilation = cfg.roi.dilation;
  return vp;
}

std::vector<ScanRecord> read_scans(const fs::path& manifest) {
  json j;
  try {
    j = read_json(manifest);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object() || !j.contains("scans") || !j["scans"].is_array())
    throw ConfigError(manifest.string() + ": expected {\"scans\": [...]}");
  std::vector<ScanRecord> out;
  for (const auto& s : j["scans"]) {
    check_keys(s, "scan", {"id", "origin", "file"});
    if (!s.contains("origin") || !s.contains("file")) throw ConfigError("scan entries need origin and file");
    ScanRecord r;
    get(s, "id", r.scan_id, "scan");
    r.origin = vec3_from_json(s["origin"]);
    std::string file;
    get(s, "file", file, "scan");
    const fs::path p = fs::path(file).is_absolute() ? fs::path(file) : manifest.parent_path() / file;
    r.points = read_cloud(p).points;
    out.push_back(std::move(r));
  }
  return out;
}

void write_scans(const std::vector<ScanRecord>& scans, const fs::path& manifest) {
  json arr = json::array();
  const fs::path dir = manifest.parent_path() / "scans";
  fs::create_directories(dir);
  for (const auto& s : scans) {
    char name[64];
    std::snprintf(name, sizeof(name), "scans/%03d.ply", s.scan_id);
    PointCloud c;
    c.points = s.points;
    write_cloud(c, manifest.parent_path() / name);
    arr.push_back({{"id", s.scan_id}, {"origin", to_json(s.origin)}, {"file", name}});
  }
  write_json(json{{"scans", arr}}, manifest);
}

json to_json(const FrameReport& r) {
  return json{{"frame", r.frame},
              {"timestamp", r.timestamp},
              {"status", r.status},
              {"note", r.note},
              {"blur_score", r.blur_score},
              {"blurry", r.blurry},
              {"roi_leaves", r.roi_leaves},
              {"edge_pixels", r.edge_pixels},
              {"edges3d", r.edges3d},
              {"correspondences", r.correspondences},
              {"iterations", r.iterations},
              {"residual_first_px", r.residual_first_px},
              {"residual_final_px", r.residual_final_px},
              {"wall_ms", r.wall_ms}};
}

void write_reports_csv(const std::vector<FrameReport>& reports, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,timestamp,status,blur_score,roi_leaves,edge_pixels,edges3d,correspondences,iterations,"
         "residual_first_px,residual_final_px,note,wall_ms\n";
  out << std::setprecision(17);
  for (const auto& r : reports) {
    std::string note = r.note;
    for (auto& ch : note)
      if (ch == ',' || ch == '\n') ch = ';';
    out << r.frame << ',' << r.timestamp << ',' << r.status << ',' << r.blur_score << ',' << r.roi_leaves << ','
        << r.edge_pixels << ',' << r.edges3d << ',' << r.correspondences << ',' << r.iterations << ','
        << r.residual_first_px << ',' << r.residual_final_px << ',' << note << ',' << r.wall_ms << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ScanRecord> read_scan_dir(const fs::path& dir, const fs::path& origins) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".ply" || ext == ".pcd")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const auto traj = read_trajectory(origins);
  if (traj.size() != files.size())
    throw ConfigError("scan directory has " + std::to_string(files.size()) + " clouds but the origin file has " +
                      std::to_string(traj.size()) + " entries");
  std::vector<ScanRecord> scans(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    scans[i].scan_id = static_cast<int>(i);
    scans[i].origin = traj[i].camera_to_world.translation;
    scans[i].points = read_cloud(files[i]).points;
  }
  return scans;
}

std::vector<EvalReport> evaluate_trajectory(const std::vector<TrajectoryEntry>& traj, const CheckerboardAnnotation& ann,
                                            const CameraIntrinsics& intr) {
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const int f = static_cast<int>(i);
    if (!ann.corners2d.count(f)) continue;
    out.push_back(evaluate_residual(traj[i].world_to_camera(), ann, f, intr));
  }
  return out;
}

void write_eval_csv(const std::vector<EvalReport>& reports, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "frame,n,residual_px\n";
  os << std::setprecision(10);
  for (const auto& r : reports) os << r.frame << ',' << r.n_corners << ',' << r.residual_px << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

double mean_residual(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : reports) s += r.residual_px;
  return s / static_cast<double>(reports.size());
}

fs::path frame_image_path(const PipelinePaths& paths, int frame) {
  return paths.images / format_index(paths.image_pattern, frame);
}

PreparedMap prepare_map(const PipelineConfig& cfg) {
  PreparedMap pm;
  if (cfg.skip_removal) {
    if (cfg.paths.map.empty()) throw ConfigError("paths.map is required when removal is skipped");
    pm.cloud = read_cloud(cfg.paths.map);
  } else {
    if (cfg.paths.scans.empty()) throw ConfigError("paths.scans is required unless skip_removal is set");
    const auto scans = read_scans(cfg.paths.scans);
    RemovalParams rp = cfg.removal;
    rp.voxel_size = cfg.leaf_size;
    rp.key_level = static_cast<int>(std::lround(std::log2(cfg.root_size / cfg.leaf_size)));
    pm.removal = remove_dynamic(scans, rp);
    pm.cloud = pm.removal->static_cloud;
  }
  pm.map = VoxelMap::build(pm.cloud.points, cfg.root_size, cfg.leaf_size);
  return pm;
}

FrameProcessor::FrameProcessor(const PipelineConfig& cfg, const VoxelMap& map, const CameraIntrinsics& intr)
    : cfg_(cfg), map_(map), intr_(intr) {
  map_leaves_ = map.num_leaves();
  if (cfg.skip_roi) shared_edges_ = extract_edges3d(map, full_roi(map), cfg.edge3d);
}

RoiResult FrameProcessor::roi_for(const Pose& pose) const {
  if (cfg_.skip_roi) return full_roi(map_);
  return select_roi(map_, make_viewpoint(cfg_, pose, intr_));
}

std::vector<Edge3D> FrameProcessor::edges_for(const RoiResult& roi) const {
  if (shared_edges_) return *shared_edges_;
  return extract_edges3d(map_, roi, cfg_.edge3d);
}

EdgeMap2D FrameProcessor::edges2d_for(const GrayImage& gray) const {
  const auto raw = canny(equalize(gray), cfg_.edge2d.canny);
  return refine_normals(raw, cfg_.edge2d.normal_radius, cfg_.edge2d.snap);
}

FrameOutput FrameProcessor::process(const FrameInput& in) const {
  RgbImage img;
  try {
    img = read_image(in.image);
  } catch (const Error& e) {
    FrameOutput out;
    out.pose = in.init;
    out.report.frame = in.frame;
    out.report.timestamp = in.timestamp;
    out.report.status = "Skipped";
    out.report.note = std::string("image: ") + e.what();
    return out;
  }
  return process(in, img);
}

FrameOutput FrameProcessor::process(const FrameInput& in, const RgbImage& image) const {
  const auto t0 = std::chrono::steady_clock::now();
  FrameOutput out;
  out.pose = in.init;
  auto& rep = out.report;
  rep.frame = in.frame;
  rep.timestamp = in.timestamp;
  auto finish = [&]() {
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };
  try {
    if (image.width != intr_.width || image.height != intr_.height) {
      rep.status = "Skipped";
      rep.note = "image size does not match intrinsics";
      return finish();
    }
    const GrayImage gray = to_gray(image);
    const auto blur = blur_score(gray, cfg_.edge2d.blur_threshold);
    rep.blur_score = blur.score;
    rep.blurry = blur.is_blurry;
    if (blur.is_blurry) {
      rep.status = "Skipped";
      rep.note = "blurry";
      return finish();
    }
    const auto roi = roi_for(in.init);
    rep.roi_leaves = roi.visible_keys.size();
    const auto e3 = edges_for(roi);
    rep.edges3d = e3.size();
    const auto e2 = edges2d_for(gray);
    rep.edge_pixels = e2.size();
    const auto r = refine_pose(in.init, e3, e2, intr_, cfg_.refine);
    out.pose = r.pose;
    rep.status = to_string(r.status);
    rep.iterations = r.iterations.size();
    if (!r.iterations.empty()) {
      rep.correspondences = r.iterations.back().correspondences;
      rep.residual_first_px = mean_first(r);
      rep.residual_final_px = r.iterations.back().mean_abs_residual_px;
    }
  } catch (const Error& e) {
    out.pose = in.init;
    rep.status = "Skipped";
    rep.note = e.what();
  }
  return finish();
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

RunResult run_refine_all(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.paths.trajectory.empty()) throw ConfigError("paths.trajectory is required");
  if (cfg.paths.intrinsics.empty()) throw ConfigError("paths.intrinsics is required");
  const auto traj = read_trajectory(cfg.paths.trajectory);
  const auto intr = read_intrinsics(cfg.paths.intrinsics);
  RunResult run;
  if (traj.empty()) return run;
  const auto pm = prepare_map(cfg);
  const FrameProcessor proc(cfg, pm.map, intr);
  std::vector<FrameOutput> outs(traj.size());
  parallel_for(traj.size(), cfg.jobs, [&](std::size_t i) {
    FrameInput in;
    in.frame = static_cast<int>(i);
    in.timestamp = traj[i].timestamp;
    in.init = traj[i].world_to_camera();
    in.image = frame_image_path(cfg.paths, in.frame);
    outs[i] = proc.process(in);
  });
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (outs[i].report.status == "Skipped")
      run.refined.push_back(traj[i]);
    else
      run.refined.push_back({traj[i].timestamp, outs[i].pose.inverse()});
    run.reports.push_back(outs[i].report);
  }
  return run;
}

void write_run_outputs(const RunResult& run, const fs::path& dir) {
  fs::create_directories(dir);
  write_trajectory(run.refined, dir / "refined.txt");
  write_reports_csv(run.reports, dir / "reports.csv");
  json arr = json::array();
  for (const auto& r : run.reports) arr.push_back(to_json(r));
  write_json(json{{"frames", arr}}, dir / "reports.json");
}

ColoredCloud run_colorize(const PipelineConfig& cfg, const std::vector<TrajectoryEntry>& traj,
                          const std::vector<FrameReport>* reports) {
  const auto pm = prepare_map(cfg);
  ColoredCloud merged = uncolored(pm.cloud);
  if (traj.empty()) return merged;
  if (cfg.paths.intrinsics.empty()) throw ConfigError("paths.intrinsics is required");
  const auto intr = read_intrinsics(cfg.paths.intrinsics);
  std::vector<ColoredCloud> per(traj.size());
  parallel_for(traj.size(), cfg.jobs, [&](std::size_t i) {
    if (reports && i < reports->size() && (*reports)[i].status == "Skipped") return;
    RgbImage img;
    try {
      img = read_image(frame_image_path(cfg.paths, static_cast<int>(i)));
    } catch (const Error&) {
      return;
    }
    const Pose pose = traj[i].world_to_camera();
    std::vector<std::uint32_t> idx;
    if (cfg.skip_roi) {
      idx.resize(pm.cloud.size());
      std::iota(idx.begin(), idx.end(), 0u);
    } else {
      idx = select_roi(pm.map, make_viewpoint(cfg, pose, intr)).point_indices;
    }
    const auto sub = colorize(pm.cloud.subset(idx), img, pose, intr, cfg.colorize, static_cast<int>(i));
    ColoredCloud full = uncolored(pm.cloud);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      full.cloud.rgb[idx[k]] = sub.cloud.rgb[k];
      full.source_frame[idx[k]] = sub.source_frame[k];
      full.depth[idx[k]] = sub.depth[k];
    }
    per[i] = std::move(full);
  });
  for (const auto& p : per)
    if (!p.source_frame.empty()) merge_colored(merged, p);
  return merged;
}

}  // namespace edgereg
