// End-to-end commands behind the `primivox` tool: scene generation,
// depth calibration, voxel fusion, and grid evaluation. Each command reads
// JSON configs, works through the frame manifest, and writes per-frame
// outputs atomically so reruns and parallel runs are bit-reproducible.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "primivox/calibrate.hpp"
#include "primivox/manifest.hpp"
#include "primivox/metrics.hpp"
#include "primivox/synthworld.hpp"
#include "primivox/voxelfuse.hpp"

namespace primivox {

// A generated dataset can hold several target cameras; each gets source views
// at fixed world-frame offsets from its own position (same orientation).
struct SceneConfig {
  SceneSpec proto;  // target_pose/source_poses filled per target at build time
  std::vector<Pose> targets;
  std::vector<Eigen::Vector3d> source_offsets;

  SceneSpec build_target(size_t target_index) const;
};

struct CalibPipelineConfig {
  CalibConfig calib;
  std::set<int> moving_classes;  // used when a frame has no static-mask file
};

SceneConfig scene_config_from_json(const std::string& json_text);
CalibPipelineConfig calib_config_from_json(const std::string& json_text);
VoxelGridConfig grid_config_from_json(const std::string& json_text);
std::string read_text_file(const std::string& path);

// synth: render every target and its sources, corrupt depth to relative,
// write frames/ + gt/ + manifest.json under out_dir.
void run_synth(const std::string& config_path, const std::string& out_dir,
               int workers, std::optional<uint64_t> seed_override);

// calibrate: for every manifest frame with relative depth and sources, run
// the scale sweep plus refinement and write per-frame metric depth, validity,
// scale field, offset record, and loss curves under out_dir.
void run_calibrate(const std::string& config_path,
                   const std::string& manifest_path, const std::string& out_dir,
                   int workers);

// fuse: back-project every frame that has semantics and a depth file in
// depth_dir, vote into the configured grid, and write voxels + votes + meta
// + a point export under out_dir.
void run_fuse(const std::string& config_path, const std::string& manifest_path,
              const std::string& depth_dir, const std::string& out_dir);

// eval: compare a predicted grid against a reference grid and write a
// metrics report (confusion matrix, per-class and mean IoU, occupancy
// precision/recall/IoU) under out_dir.
void run_eval(const std::string& pred_path, const std::string& truth_path,
              const std::string& out_dir, const std::set<int>& ignore);

// The `primivox` command line. Returns the process exit code; failures are
// reported as a single "error[code]: message" line on stderr.
int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace primivox
