#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgereg/colorize.hpp"
#include "edgereg/dynamic_removal.hpp"
#include "edgereg/edge2d.hpp"
#include "edgereg/edge3d.hpp"
#include "edgereg/io.hpp"
#include "edgereg/pose_refine.hpp"
#include "edgereg/visibility.hpp"

namespace edgereg {

struct PipelinePaths {
  std::filesystem::path map;          // point cloud; used when removal is skipped
  std::filesystem::path scans;        // scan manifest; required unless removal is skipped
  std::filesystem::path images;       // directory
  std::string image_pattern = "%06d.png";  // printf pattern over the frame index
  std::filesystem::path trajectory;   // initial camera-to-world poses
  std::filesystem::path intrinsics;
  std::filesystem::path annotations;  // optional checkerboard annotation
  std::filesystem::path output_dir = "out";
};

struct RoiSettings {
  double fov_widen = 1.1;
  double max_dist = 20.0;
  double phi_scale = 2.0;
  int dilation = 1;
};

struct Edge2dSettings {
  CannyParams canny;
  double blur_threshold = 100.0;
  double normal_radius = 5.0;
  bool snap = true;  // move edge pixels onto their local line
};

struct PipelineConfig {
  PipelinePaths paths;
  RemovalParams removal;
  RoiSettings roi;
  Edge3dConfig edge3d;
  Edge2dSettings edge2d;
  RefineConfig refine;
  ColorizeConfig colorize;
  double root_size = 2.0;
  double leaf_size = 0.0625;
  bool skip_removal = false;
  bool skip_roi = false;
  int jobs = 1;

  void validate() const;  // throws ConfigError
};

/// Relative paths resolve against `base_dir`. Unknown keys and type errors throw ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const PipelineConfig& cfg);
/// Throws IoError when the file cannot be read and ConfigError when it is malformed.
PipelineConfig read_pipeline_config(const std::filesystem::path& path);

/// ROI viewpoint for one world -> camera pose from the config's ROI settings.
Viewpoint make_viewpoint(const PipelineConfig& cfg, const Pose& pose, const CameraIntrinsics& intr);

/// Scan manifest: {"scans": [{"id": 0, "origin": [x, y, z], "file": "scans/000.ply"}, ...]}.
std::vector<ScanRecord> read_scans(const std::filesystem::path& manifest);
void write_scans(const std::vector<ScanRecord>& scans, const std::filesystem::path& manifest);
/// Every .ply / .pcd file of `dir` in name order; scan i takes its id i and the
/// translation of trajectory entry i as its origin. Throws ConfigError on a count mismatch.
std::vector<ScanRecord> read_scan_dir(const std::filesystem::path& dir, const std::filesystem::path& origins);

struct FrameReport {
  int frame = 0;
  double timestamp = 0.0;
  std::string status;  // a RefineStatus name, or "Skipped"
  std::string note;
  double blur_score = 0.0;
  bool blurry = false;
  std::size_t roi_leaves = 0;
  std::size_t edge_pixels = 0;
  std::size_t edges3d = 0;
  std::size_t correspondences = 0;
  std::size_t iterations = 0;
  double residual_first_px = 0.0;  // mean |residual| after the first iteration
  double residual_final_px = 0.0;
  double wall_ms = 0.0;
};

/// CSV with a header row; wall time is the last column.
void write_reports_csv(const std::vector<FrameReport>& reports, const std::filesystem::path& path);
nlohmann::json to_json(const FrameReport& r);

/// Map after optional dynamic removal, with the voxel structure built over it.
struct PreparedMap {
  PointCloud cloud;
  VoxelMap map;
  std::optional<RemovalResult> removal;
};
PreparedMap prepare_map(const PipelineConfig& cfg);

struct FrameInput {
  int frame = 0;
  double timestamp = 0.0;
  Pose init;  // world -> camera
  std::filesystem::path image;
};

struct FrameOutput {
  Pose pose;  // world -> camera
  FrameReport report;
};

/// Shared per-run state: read-only after construction.
class FrameProcessor {
 public:
  FrameProcessor(const PipelineConfig& cfg, const VoxelMap& map, const CameraIntrinsics& intr);
  FrameOutput process(const FrameInput& in) const;
  FrameOutput process(const FrameInput& in, const RgbImage& image) const;

  /// ROI for one pose (or the whole map when ROI is skipped).
  RoiResult roi_for(const Pose& pose) const;
  std::vector<Edge3D> edges_for(const RoiResult& roi) const;
  EdgeMap2D edges2d_for(const GrayImage& gray) const;

 private:
  const PipelineConfig& cfg_;
  const VoxelMap& map_;
  CameraIntrinsics intr_;
  std::optional<std::vector<Edge3D>> shared_edges_;  // set when ROI is skipped
  std::size_t map_leaves_ = 0;
};

struct RunResult {
  std::vector<TrajectoryEntry> refined;
  std::vector<FrameReport> reports;
};

/// Runs fn(i) for i in [0, n) on `jobs` threads; calls for distinct i run independently.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Full refinement over the trajectory. Per-frame failures become Skipped reports.
RunResult run_refine_all(const PipelineConfig& cfg);
/// Writes refined trajectory, reports.csv and reports.json into the output directory.
void write_run_outputs(const RunResult& run, const std::filesystem::path& dir);

/// Colorizes the (prepared) map from every non-skipped frame and merges by the min-depth rule.
ColoredCloud run_colorize(const PipelineConfig& cfg, const std::vector<TrajectoryEntry>& traj,
                          const std::vector<FrameReport>* reports = nullptr);

/// Residual per trajectory entry that has annotated 2D corners (frame id = entry index).
std::vector<EvalReport> evaluate_trajectory(const std::vector<TrajectoryEntry>& traj,
                                            const CheckerboardAnnotation& ann, const CameraIntrinsics& intr);
/// CSV columns frame,n,residual_px.
void write_eval_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);
double mean_residual(const std::vector<EvalReport>& reports);

std::filesystem::path frame_image_path(const PipelinePaths& paths, int frame);

}  // namespace edgereg
