#include "primivox/voxelfuse.hpp"

#include <cmath>

namespace primivox {

void VoxelGridConfig::validate() const {
  if (!(cell_size > 0) || !std::isfinite(cell_size)) {
    throw Error(ErrorCode::kConfig, "cell_size must be positive finite");
  }
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw Error(ErrorCode::kConfig, "grid dims must be positive");
  }
  if (num_classes <= 0) {
    throw Error(ErrorCode::kConfig, "grid needs at least one class");
  }
  if (min_votes < 1) {
    throw Error(ErrorCode::kConfig, "min_votes must be at least 1");
  }
  if (!origin.allFinite()) {
    throw Error(ErrorCode::kConfig, "grid origin must be finite");
  }
  for (int c : moving_classes) {
    if (c < 0 || c >= num_classes) {
      throw Error(ErrorCode::kConfig, "moving class id outside [0, K)");
    }
  }
}

std::optional<std::array<int, 3>> point_to_voxel(const Eigen::Vector3d& point,
                                                 const VoxelGridConfig& cfg) {
  std::array<int, 3> idx;
  for (int a = 0; a < 3; ++a) {
    const double rel = (point[a] - cfg.origin[a]) / cfg.cell_size;
    const double cell = std::floor(rel);
    if (cell < 0 || cell >= static_cast<double>(cfg.dims[a])) {
      return std::nullopt;
    }
    idx[a] = static_cast<int>(cell);
  }
  return idx;
}

VoteGrid accumulate_votes(const std::vector<FusionFrame>& frames,
                          const VoxelGridConfig& cfg) {
  cfg.validate();
  VoteGrid votes(cfg.dims, cfg.num_classes);
  for (const FusionFrame& frame : frames) {
    frame.intrinsics.validate();
    frame.pose.validate();
    const int h = frame.depth.height;
    const int w = frame.depth.width;
    if (frame.valid.height != h || frame.valid.width != w ||
        frame.semantics.height != h || frame.semantics.width != w) {
      throw Error(ErrorCode::kDimension, "fusion frame shapes differ");
    }
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!frame.valid.at(v, u)) continue;
        const int32_t label = frame.semantics.at(v, u);
        if (label == kVoidLabel) continue;
        if (label < 0 || label >= cfg.num_classes) {
          throw Error(ErrorCode::kRange, "pixel label outside [0, K)");
        }
        if (!cfg.include_moving && cfg.moving_classes.count(label)) continue;
        const PixelCoord p{static_cast<double>(u), static_cast<double>(v)};
        const Eigen::Vector3d point = frame.pose.apply(
            backproject(p, frame.depth.at(v, u), frame.intrinsics));
        const auto idx = point_to_voxel(point, cfg);
        if (!idx) continue;
        ++votes.at((*idx)[0], (*idx)[1], (*idx)[2], label);
      }
    }
  }
  return votes;
}

VoxelGrid argmax_votes(const VoteGrid& votes, const VoxelGridConfig& cfg) {
  if (votes.dims != cfg.dims || votes.num_classes != cfg.num_classes) {
    throw Error(ErrorCode::kDimension, "vote grid shape differs from config");
  }
  VoxelGrid grid(votes.dims);
  for (int x = 0; x < votes.dims[0]; ++x) {
    for (int y = 0; y < votes.dims[1]; ++y) {
      for (int z = 0; z < votes.dims[2]; ++z) {
        int best = kFreeLabel;
        uint32_t best_count = 0;
        for (int k = 0; k < votes.num_classes; ++k) {
          const uint32_t count = votes.at(x, y, z, k);
          if (count > best_count) {  // strict: ties keep the lowest class id
            best_count = count;
            best = k;
          }
        }
        grid.at(x, y, z) =
            (best_count >= static_cast<uint32_t>(cfg.min_votes)) ? best
                                                                 : kFreeLabel;
      }
    }
  }
  return grid;
}

FuseResult fuse(const std::vector<FusionFrame>& frames,
                const VoxelGridConfig& cfg) {
  FuseResult out;
  out.votes = accumulate_votes(frames, cfg);
  out.grid = argmax_votes(out.votes, cfg);
  return out;
}

std::vector<LabeledPoint> grid_to_points(const VoxelGrid& grid,
                                         const VoxelGridConfig& cfg) {
  std::vector<LabeledPoint> out;
  for (int x = 0; x < grid.dims[0]; ++x) {
    for (int y = 0; y < grid.dims[1]; ++y) {
      for (int z = 0; z < grid.dims[2]; ++z) {
        const int32_t label = grid.at(x, y, z);
        if (label == kFreeLabel) continue;
        LabeledPoint p;
        p.position = cfg.origin + cfg.cell_size *
                                      Eigen::Vector3d(x + 0.5, y + 0.5,
                                                      z + 0.5);
        p.label = label;
        out.push_back(p);
      }
    }
  }
  return out;
}

}  // namespace primivox
