#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "edgereg/dataset.hpp"
#include "edgereg/edge2d.hpp"
#include "edgereg/edge3d.hpp"
#include "edgereg/errors.hpp"
#include "edgereg/pipeline.hpp"
#include "edgereg/visibility.hpp"

using namespace edgereg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Globals {
  std::string config;
  int jobs = 0;  // 0 keeps the config value
  std::optional<std::uint64_t> seed;
};

PipelineConfig load_config(const Globals& g, const PipelineConfig& fallback = {}) {
  PipelineConfig cfg = g.config.empty() ? fallback : read_pipeline_config(g.config);
  if (g.jobs > 0) cfg.jobs = g.jobs;
  cfg.validate();
  return cfg;
}

CameraIntrinsics load_intrinsics(const std::string& flag, const PipelineConfig& cfg) {
  const fs::path p = flag.empty() ? cfg.paths.intrinsics : fs::path(flag);
  if (p.empty()) throw ConfigError("camera intrinsics required (--intrinsics or paths.intrinsics)");
  return read_intrinsics(p);
}

template <typename T>
T pick(const std::string& flag, const T& from_config, const char* what) {
  const T v = flag.empty() ? from_config : T(flag);
  if (v.empty()) throw ConfigError(std::string(what) + " required");
  return v;
}

Pose frame_pose(const fs::path& traj_path, int frame) {
  const auto traj = read_trajectory(traj_path);
  if (frame < 0 || frame >= static_cast<int>(traj.size()))
    throw ConfigError("--frame " + std::to_string(frame) + " outside trajectory of " + std::to_string(traj.size()) +
                      " entries");
  return traj[static_cast<std::size_t>(frame)].world_to_camera();
}

std::vector<FrameReport> statuses_from_json(const fs::path& path) {
  const json j = read_json(path);
  std::vector<FrameReport> out;
  try {
    for (const auto& f : j.at("frames")) {
      FrameReport r;
      r.frame = f.at("frame").get<int>();
      r.status = f.at("status").get<std::string>();
      out.push_back(r);
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return out;
}

void print_eval(const char* label, const std::vector<EvalReport>& reps) {
  std::printf("%s: %zu frames, mean residual %.4f px\n", label, reps.size(), mean_residual(reps));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-based camera pose refinement against a LiDAR map"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline config JSON");
  app.add_option("--jobs", g.jobs, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed for synthetic data");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset directory");
  std::string synth_out, synth_spec;
  int synth_frames = 10;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--spec", synth_spec, "Dataset spec JSON (overrides on the default room)");
  synth->add_option("--frames", synth_frames, "Frame count when no spec is given")->check(CLI::PositiveNumber);

  // remove-dynamic
  auto* rd = app.add_subcommand("remove-dynamic", "Remove voxels seen through by other scans");
  std::string rd_scans, rd_origins, rd_out, rd_removed;
  rd->add_option("--scans", rd_scans, "Scan manifest JSON or a directory of clouds");
  rd->add_option("--origins", rd_origins, "Trajectory whose entry i is the origin of scan i (directory input)");
  rd->add_option("--out", rd_out, "Static cloud output")->required();
  rd->add_option("--removed", rd_removed, "Removed points output");

  // roi
  auto* roi = app.add_subcommand("roi", "Visible region of the map for one frame");
  std::string roi_map, roi_traj, roi_out, roi_intr;
  int roi_frame = 0;
  roi->add_option("--map", roi_map, "Map cloud");
  roi->add_option("--traj", roi_traj, "Camera-to-world trajectory");
  roi->add_option("--frame", roi_frame, "Trajectory entry index");
  roi->add_option("--out", roi_out, "Output cloud")->required();
  roi->add_option("--intrinsics", roi_intr, "Camera intrinsics JSON");

  // edges3d
  auto* e3 = app.add_subcommand("edges3d", "Plane-intersection edges of the map");
  std::string e3_map, e3_traj, e3_out, e3_intr;
  int e3_frame = -1;
  e3->add_option("--map", e3_map, "Map cloud");
  e3->add_option("--traj", e3_traj, "Trajectory; with --frame restricts extraction to that frame's ROI");
  e3->add_option("--frame", e3_frame, "Trajectory entry index");
  e3->add_option("--out", e3_out, "Segment PLY output")->required();
  e3->add_option("--intrinsics", e3_intr, "Camera intrinsics JSON");

  // edges2d
  auto* e2 = app.add_subcommand("edges2d", "Blur score and Canny edges of one image");
  std::string e2_image, e2_out, e2_points;
  std::optional<double> e2_low, e2_high, e2_sigma, e2_blur;
  e2->add_option("--image", e2_image, "Input image (PNG, PGM or PPM)")->required();
  e2->add_option("--out", e2_out, "Edge mask image output");
  e2->add_option("--points", e2_points, "CSV of edge pixels x,y,nx,ny");
  e2->add_option("--low", e2_low, "Canny low threshold");
  e2->add_option("--high", e2_high, "Canny high threshold");
  e2->add_option("--sigma", e2_sigma, "Gaussian sigma");
  e2->add_option("--blur-threshold", e2_blur, "Blur gate threshold");

  // refine
  auto* rf = app.add_subcommand("refine", "Refine every trajectory pose (config driven)");
  std::string rf_traj, rf_images, rf_out;
  rf->add_option("--traj", rf_traj, "Initial camera-to-world trajectory");
  rf->add_option("--images", rf_images, "Image directory");
  rf->add_option("--out", rf_out, "Output directory");

  // colorize
  auto* col = app.add_subcommand("colorize", "Color map points from posed images");
  std::string col_map, col_traj, col_images, col_out, col_intr, col_reports;
  col->add_option("--map", col_map, "Map cloud");
  col->add_option("--traj", col_traj, "Camera-to-world trajectory")->required();
  col->add_option("--images", col_images, "Image directory");
  col->add_option("--out", col_out, "Colored PLY output")->required();
  col->add_option("--intrinsics", col_intr, "Camera intrinsics JSON");
  col->add_option("--reports", col_reports, "reports.json; frames marked Skipped are not used");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Checkerboard corner residual per frame");
  std::string ev_ann, ev_traj, ev_report, ev_intr;
  ev->add_option("--ann", ev_ann, "Checkerboard annotation JSON");
  ev->add_option("--traj", ev_traj, "Camera-to-world trajectory")->required();
  ev->add_option("--report", ev_report, "CSV output (frame,n,residual_px)");
  ev->add_option("--intrinsics", ev_intr, "Camera intrinsics JSON");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline: refine, colorize and evaluate");
  std::string run_out;
  bool run_no_color = false;
  run->add_option("--out", run_out, "Output directory (overrides paths.output_dir)");
  run->add_flag("--no-colorize", run_no_color, "Skip the colorized map");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) {
      DatasetSpec spec;
      if (!synth_spec.empty()) {
        json j = read_json(synth_spec);
        if (g.seed) j["seed"] = *g.seed;
        spec = dataset_spec_from_json(j);
      } else {
        spec = default_dataset_spec(synth_frames, g.seed.value_or(0));
      }
      PipelineConfig base = load_config(g, synthetic_pipeline_defaults());
      const auto files = write_dataset(spec, synth_out, base);
      std::printf("wrote %zu frames to %s (config %s)\n", files.gt.size(), synth_out.c_str(),
                  files.config.string().c_str());
    } else if (*rd) {
      const auto cfg = load_config(g);
      const fs::path scans_path = pick<fs::path>(rd_scans, cfg.paths.scans, "--scans");
      std::vector<ScanRecord> scans;
      if (fs::is_directory(scans_path)) {
        if (rd_origins.empty()) throw ConfigError("--origins is required with a scan directory");
        scans = read_scan_dir(scans_path, rd_origins);
      } else {
        scans = read_scans(scans_path);
      }
      RemovalParams rp = cfg.removal;
      rp.voxel_size = cfg.leaf_size;
      rp.key_level = static_cast<int>(std::lround(std::log2(cfg.root_size / cfg.leaf_size)));
      const auto res = remove_dynamic(scans, rp);
      write_cloud(res.static_cloud, rd_out);
      if (!rd_removed.empty()) write_cloud(res.removed_cloud, rd_removed);
      std::printf("%zu scans, %zu points: kept %zu, removed %zu points in %zu voxels\n", scans.size(),
                  res.merged.size(), res.static_cloud.size(), res.removed_cloud.size(), res.removed_keys.size());
    } else if (*roi) {
      const auto cfg = load_config(g);
      const auto cloud = read_cloud(pick<fs::path>(roi_map, cfg.paths.map, "--map"));
      const auto intr = load_intrinsics(roi_intr, cfg);
      const Pose pose = frame_pose(pick<fs::path>(roi_traj, cfg.paths.trajectory, "--traj"), roi_frame);
      const auto map = VoxelMap::build(cloud.points, cfg.root_size, cfg.leaf_size);
      const auto r = select_roi(map, make_viewpoint(cfg, pose, intr));
      write_cloud(cloud.subset(r.point_indices), roi_out);
      std::printf("frame %d: %zu candidate leaves, %zu hull-visible, %zu after dilation, %zu points\n", roi_frame,
                  r.candidate_keys.size(), r.hull_keys.size(), r.visible_keys.size(), r.point_indices.size());
    } else if (*e3) {
      const auto cfg = load_config(g);
      const auto cloud = read_cloud(pick<fs::path>(e3_map, cfg.paths.map, "--map"));
      const auto map = VoxelMap::build(cloud.points, cfg.root_size, cfg.leaf_size);
      RoiResult r;
      if (e3_frame >= 0) {
        const auto intr = load_intrinsics(e3_intr, cfg);
        const Pose pose = frame_pose(pick<fs::path>(e3_traj, cfg.paths.trajectory, "--traj"), e3_frame);
        r = select_roi(map, make_viewpoint(cfg, pose, intr));
      } else {
        r = full_roi(map);
      }
      const auto edges = extract_edges3d(map, r, cfg.edge3d);
      std::vector<std::pair<Vec3, Vec3>> segs;
      for (const auto& e : edges) segs.emplace_back(e.a, e.b);
      write_segments_ply(segs, e3_out);
      std::printf("%zu edges\n", edges.size());
      for (const auto& e : edges)
        std::printf("  (%.4f %.4f %.4f) -> (%.4f %.4f %.4f) length %.3f\n", e.a.x(), e.a.y(), e.a.z(), e.b.x(),
                    e.b.y(), e.b.z(), e.length());
    } else if (*e2) {
      const auto cfg = load_config(g);
      Edge2dSettings s = cfg.edge2d;
      if (e2_low) s.canny.low = *e2_low;
      if (e2_high) s.canny.high = *e2_high;
      if (e2_sigma) s.canny.sigma = *e2_sigma;
      if (e2_blur) s.blur_threshold = *e2_blur;
      if (!(s.canny.low >= 0 && s.canny.low <= s.canny.high && s.canny.sigma >= 0 && s.blur_threshold >= 0))
        throw ConfigError("edge2d: need 0 <= low <= high, sigma >= 0 and blur threshold >= 0");
      const auto gray = read_gray(e2_image);
      const auto blur = blur_score(gray, s.blur_threshold);
      const auto edges = refine_normals(canny(equalize(gray), s.canny), s.normal_radius, s.snap);
      std::printf("blur score %.2f (%s), %zu edge pixels\n", blur.score, blur.is_blurry ? "blurry" : "sharp",
                  edges.size());
      if (!e2_out.empty()) {
        GrayImage mask(gray.width, gray.height, 0);
        for (const auto& p : edges.pixels) {
          const int x = static_cast<int>(std::lround(p.x())), y = static_cast<int>(std::lround(p.y()));
          if (x >= 0 && y >= 0 && x < mask.width && y < mask.height) mask.at(x, y) = 255;
        }
        write_image(mask, e2_out);
      }
      if (!e2_points.empty()) {
        std::ofstream os(e2_points);
        if (!os) throw IoError("cannot write " + e2_points);
        os << "x,y,nx,ny\n";
        for (std::size_t i = 0; i < edges.size(); ++i)
          os << edges.pixels[i].x() << ',' << edges.pixels[i].y() << ',' << edges.normals[i].x() << ','
             << edges.normals[i].y() << '\n';
      }
    } else if (*rf) {
      auto cfg = load_config(g);
      if (!rf_traj.empty()) cfg.paths.trajectory = rf_traj;
      if (!rf_images.empty()) cfg.paths.images = rf_images;
      if (!rf_out.empty()) cfg.paths.output_dir = rf_out;
      const auto res = run_refine_all(cfg);
      write_run_outputs(res, cfg.paths.output_dir);
      for (const auto& r : res.reports)
        std::printf("frame %d %s edges3d %zu corr %zu residual %.3f -> %.3f px%s%s\n", r.frame, r.status.c_str(),
                    r.edges3d, r.correspondences, r.residual_first_px, r.residual_final_px,
                    r.note.empty() ? "" : " note: ", r.note.c_str());
      std::printf("wrote %s\n", (cfg.paths.output_dir / "refined.txt").string().c_str());
    } else if (*col) {
      auto cfg = load_config(g);
      if (!col_map.empty()) {
        cfg.paths.map = col_map;
        cfg.skip_removal = true;
      }
      if (!col_images.empty()) cfg.paths.images = col_images;
      if (!col_intr.empty()) cfg.paths.intrinsics = col_intr;
      if (cfg.paths.intrinsics.empty()) throw ConfigError("camera intrinsics required (--intrinsics or paths.intrinsics)");
      const auto traj = read_trajectory(col_traj);
      std::vector<FrameReport> reps;
      if (!col_reports.empty()) reps = statuses_from_json(col_reports);
      const auto colored = run_colorize(cfg, traj, col_reports.empty() ? nullptr : &reps);
      write_cloud(colored.cloud, col_out);
      std::printf("colored %zu of %zu points\n", colored.colored_count(), colored.cloud.size());
    } else if (*ev) {
      const auto cfg = load_config(g);
      const auto ann = read_annotation(pick<fs::path>(ev_ann, cfg.paths.annotations, "--ann"));
      const auto intr = load_intrinsics(ev_intr, cfg);
      const auto reps = evaluate_trajectory(read_trajectory(ev_traj), ann, intr);
      for (const auto& r : reps) std::printf("frame %d n %zu residual %.4f px\n", r.frame, r.n_corners, r.residual_px);
      print_eval("mean", reps);
      if (!ev_report.empty()) write_eval_csv(reps, ev_report);
    } else if (*run) {
      auto cfg = load_config(g);
      if (!run_out.empty()) cfg.paths.output_dir = run_out;
      const fs::path out = cfg.paths.output_dir;
      const auto res = run_refine_all(cfg);
      write_run_outputs(res, out);
      std::size_t skipped = 0;
      for (const auto& r : res.reports) skipped += r.status == "Skipped";
      std::printf("refined %zu frames (%zu skipped) -> %s\n", res.reports.size(), skipped,
                  (out / "refined.txt").string().c_str());
      if (!run_no_color) {
        const auto colored = run_colorize(cfg, res.refined, &res.reports);
        write_cloud(colored.cloud, out / "colored.ply");
        std::printf("colored %zu of %zu points -> %s\n", colored.colored_count(), colored.cloud.size(),
                    (out / "colored.ply").string().c_str());
      }
      if (!cfg.paths.annotations.empty() && !res.refined.empty()) {
        const auto ann = read_annotation(cfg.paths.annotations);
        const auto intr = read_intrinsics(cfg.paths.intrinsics);
        const auto before = evaluate_trajectory(read_trajectory(cfg.paths.trajectory), ann, intr);
        const auto after = evaluate_trajectory(res.refined, ann, intr);
        write_eval_csv(before, out / "eval_initial.csv");
        write_eval_csv(after, out / "eval_refined.csv");
        print_eval("initial", before);
        print_eval("refined", after);
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const UnsupportedFormat& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
