#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "edgereg/io.hpp"
#include "edgereg/pipeline.hpp"
#include "edgereg/synth.hpp"

namespace edgereg {

/// Everything needed to write a synthetic run directory.
struct DatasetSpec {
  SceneSpec scene;
  CameraIntrinsics intr;
  std::vector<Pose> cameras;  // ground-truth world -> camera, one per frame
  double perturb_rot_deg = 1.0;
  double perturb_trans_m = 0.02;
  double corner_noise_px = 0.0;
  std::vector<int> blurred_frames;  // rendered with a heavy box blur
  std::vector<int> missing_frames;  // no image written
  std::uint64_t seed = 0;
};

/// Room corner closed by a ceiling, a 7x5 checkerboard 5 mm off the x = 0 wall,
/// two scan origins and `frames` cameras on a small arc facing the corner.
DatasetSpec default_dataset_spec(int frames = 10, std::uint64_t seed = 0);

/// Overrides on top of the default spec. Unknown keys throw ConfigError.
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

struct DatasetFiles {
  std::filesystem::path config;  // pipeline config referencing everything below
  std::vector<TrajectoryEntry> gt;
  std::vector<TrajectoryEntry> init;
  CheckerboardAnnotation annotation;
};

/// Pipeline defaults for indoor synthetic runs: ROI mirror parameter phi = 200 * max_dist,
/// large enough that concave room corners stay visible, and a blur threshold of 250
/// between sharp flat-shaded renders (~370) and box-blurred ones (~150).
PipelineConfig synthetic_pipeline_defaults();

/// Writes scans/, scans.json, map.ply, images/, intrinsics.json, trajectory_gt.txt,
/// trajectory_init.txt, board.json and config.json under `dir`.
DatasetFiles write_dataset(const DatasetSpec& spec, const std::filesystem::path& dir,
                           const PipelineConfig& base = synthetic_pipeline_defaults());

}  // namespace edgereg
