// Multi-view semantic fusion into a labeled voxel grid. Every valid labeled
// pixel back-projects to one world point and casts one vote for its class in
// the voxel containing that point; per-voxel majority (with a configurable
// minimum) decides the final label.
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "primivox/depth.hpp"
#include "primivox/geometry.hpp"
#include "primivox/semantics.hpp"

namespace primivox {

// Label value for voxels that received no deciding vote. Serialized as 255
// in uint8 voxel grid files.
inline constexpr int kFreeLabel = -1;

enum class TieBreak { kLowestIndex };

struct VoxelGridConfig {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // min corner, world frame
  double cell_size = 0.4;                            // meters, uniform
  std::array<int, 3> dims = {0, 0, 0};               // cells along x, y, z
  int num_classes = 0;                               // K
  int min_votes = 1;                 // votes required to label a voxel
  TieBreak tie_break = TieBreak::kLowestIndex;
  bool include_moving = true;        // fuse pixels of moving classes too
  std::set<int> moving_classes;      // class ids treated as moving

  void validate() const;

  size_t voxel_count() const {
    return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
  }
};

struct VoteGrid {
  std::array<int, 3> dims = {0, 0, 0};
  int num_classes = 0;
  std::vector<uint32_t> votes;  // row-major [x][y][z][k]

  VoteGrid() = default;
  VoteGrid(const std::array<int, 3>& d, int k)
      : dims(d), num_classes(k),
        votes(static_cast<size_t>(d[0]) * d[1] * d[2] * k, 0) {}

  uint32_t at(int x, int y, int z, int k) const {
    return votes[((static_cast<size_t>(x) * dims[1] + y) * dims[2] + z) *
                     num_classes + k];
  }
  uint32_t& at(int x, int y, int z, int k) {
    return votes[((static_cast<size_t>(x) * dims[1] + y) * dims[2] + z) *
                     num_classes + k];
  }

  uint64_t total() const {
    uint64_t n = 0;
    for (uint32_t v : votes) n += v;
    return n;
  }
};

struct VoxelGrid {
  std::array<int, 3> dims = {0, 0, 0};
  std::vector<int32_t> labels;  // row-major [x][y][z], kFreeLabel when empty

  VoxelGrid() = default;
  VoxelGrid(const std::array<int, 3>& d, int32_t fill = kFreeLabel)
      : dims(d),
        labels(static_cast<size_t>(d[0]) * d[1] * d[2], fill) {}

  int32_t at(int x, int y, int z) const {
    return labels[(static_cast<size_t>(x) * dims[1] + y) * dims[2] + z];
  }
  int32_t& at(int x, int y, int z) {
    return labels[(static_cast<size_t>(x) * dims[1] + y) * dims[2] + z];
  }
};

// One calibrated view ready for fusion.
struct FusionFrame {
  MetricDepthMap depth;
  ValidityMask valid;
  SemanticMap semantics;
  CameraIntrinsics intrinsics;
  Pose pose;  // camera-to-world
};

// Index of the voxel containing a world point, or nullopt when outside the
// grid. Points on a face boundary belong to the higher cell (floor rule).
std::optional<std::array<int, 3>> point_to_voxel(const Eigen::Vector3d& point,
                                                 const VoxelGridConfig& cfg);

// Accumulates one vote per usable pixel across all frames. A pixel is usable
// when its depth is valid, its label is not VOID, the label passes the
// moving-class policy, and the back-projected point lands inside the grid.
VoteGrid accumulate_votes(const std::vector<FusionFrame>& frames,
                          const VoxelGridConfig& cfg);

// Majority decision per voxel: arg-max class when the winning count reaches
// min_votes, otherwise FREE. Ties resolve per cfg.tie_break.
VoxelGrid argmax_votes(const VoteGrid& votes, const VoxelGridConfig& cfg);

// accumulate_votes followed by argmax_votes.
struct FuseResult {
  VoxelGrid grid;
  VoteGrid votes;
};
FuseResult fuse(const std::vector<FusionFrame>& frames,
                const VoxelGridConfig& cfg);

// Center coordinates of labeled voxels, for export: (x, y, z, label) rows.
struct LabeledPoint {
  Eigen::Vector3d position;
  int32_t label;
};
std::vector<LabeledPoint> grid_to_points(const VoxelGrid& grid,
                                         const VoxelGridConfig& cfg);

}  // namespace primivox
