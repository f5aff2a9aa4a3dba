#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "primivox/error.hpp"
#include "primivox/voxelfuse.hpp"

using namespace primivox;

namespace {

VoxelGridConfig small_grid(int num_classes) {
  VoxelGridConfig cfg;
  cfg.origin = Eigen::Vector3d(-2.0, -2.0, 0.0);
  cfg.cell_size = 0.5;
  cfg.dims = {8, 8, 4};
  cfg.num_classes = num_classes;
  return cfg;
}

CameraIntrinsics small_camera() {
  CameraIntrinsics k;
  k.fx = 30.0;
  k.fy = 30.0;
  k.cx = 4.5;
  k.cy = 3.5;
  k.width = 10;
  k.height = 8;
  return k;
}

Pose identity_pose() {
  Pose p;
  p.rotation = Eigen::Matrix3d::Identity();
  p.translation = Eigen::Vector3d::Zero();
  return p;
}

FusionFrame random_frame(std::mt19937_64& rng, const CameraIntrinsics& k,
                         int num_classes) {
  std::uniform_real_distribution<double> depth_dist(0.3, 3.5);
  std::uniform_int_distribution<int> label_dist(-1, num_classes - 1);
  std::bernoulli_distribution valid_dist(0.85);
  std::uniform_real_distribution<double> shift(-0.4, 0.4);
  std::uniform_real_distribution<double> angle(-0.2, 0.2);

  FusionFrame f;
  f.depth = MetricDepthMap(k.height, k.width);
  f.valid = ValidityMask(k.height, k.width, false);
  f.semantics = SemanticMap(k.height, k.width, num_classes);
  f.intrinsics = k;
  Eigen::Vector3d axis(shift(rng), shift(rng), 1.0);
  axis.normalize();
  f.pose.rotation = Eigen::AngleAxisd(angle(rng), axis).toRotationMatrix();
  f.pose.translation =
      Eigen::Vector3d(shift(rng), shift(rng), shift(rng) - 0.5);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      f.depth.at(v, u) = depth_dist(rng);
      f.valid.set(v, u, valid_dist(rng));
      f.semantics.at(v, u) = label_dist(rng);
    }
  }
  return f;
}

// Straight-line reference implementation of vote accumulation.
VoteGrid naive_votes(const std::vector<FusionFrame>& frames,
                     const VoxelGridConfig& cfg) {
  VoteGrid grid(cfg.dims, cfg.num_classes);
  for (const FusionFrame& f : frames) {
    for (int v = 0; v < f.depth.height; ++v) {
      for (int u = 0; u < f.depth.width; ++u) {
        if (!f.valid.at(v, u)) continue;
        const int32_t label = f.semantics.at(v, u);
        if (label == kVoidLabel) continue;
        if (!cfg.include_moving && cfg.moving_classes.count(label)) continue;
        const Eigen::Vector3d point = f.pose.apply(
            backproject({double(u), double(v)}, f.depth.at(v, u),
                        f.intrinsics));
        const Eigen::Vector3d rel = (point - cfg.origin) / cfg.cell_size;
        const int x = int(std::floor(rel.x()));
        const int y = int(std::floor(rel.y()));
        const int z = int(std::floor(rel.z()));
        if (x < 0 || y < 0 || z < 0 || x >= cfg.dims[0] || y >= cfg.dims[1] ||
            z >= cfg.dims[2]) {
          continue;
        }
        ++grid.at(x, y, z, label);
      }
    }
  }
  return grid;
}

}  // namespace

TEST_CASE("points map to voxels by the floor rule") {
  VoxelGridConfig cfg = small_grid(2);
  // Cell (0,0,0) spans [-2,-1.5) x [-2,-1.5) x [0,0.5).
  auto idx = point_to_voxel(Eigen::Vector3d(-1.8, -1.9, 0.1), cfg);
  REQUIRE(idx.has_value());
  CHECK(*idx == std::array<int, 3>{0, 0, 0});

  // A point exactly on a face boundary belongs to the higher cell.
  auto on_face = point_to_voxel(Eigen::Vector3d(-1.5, -2.0, 0.0), cfg);
  REQUIRE(on_face.has_value());
  CHECK(*on_face == std::array<int, 3>{1, 0, 0});

  // Outside on any axis: no voxel.
  CHECK_FALSE(point_to_voxel(Eigen::Vector3d(-2.1, 0.0, 0.1), cfg));
  CHECK_FALSE(point_to_voxel(Eigen::Vector3d(0.0, 0.0, -0.01), cfg));
  // The far face itself is already outside (half-open cells).
  CHECK_FALSE(point_to_voxel(Eigen::Vector3d(2.0, 0.0, 0.1), cfg));
  CHECK_FALSE(point_to_voxel(Eigen::Vector3d(0.0, 0.0, 2.0), cfg));
}

TEST_CASE("a single valid pixel casts exactly one vote in the right cell") {
  VoxelGridConfig cfg = small_grid(3);
  CameraIntrinsics k = small_camera();
  k.width = 1;
  k.height = 1;
  k.cx = 0.0;
  k.cy = 0.0;

  FusionFrame f;
  f.depth = MetricDepthMap(1, 1, 1.2);  // point (0, 0, 1.2) in world
  f.valid = ValidityMask(1, 1, true);
  f.semantics = SemanticMap(1, 1, 3);
  f.semantics.at(0, 0) = 2;
  f.intrinsics = k;
  f.pose = identity_pose();

  const VoteGrid votes = accumulate_votes({f}, cfg);
  CHECK(votes.total() == 1);
  // (0,0,1.2) relative to origin (-2,-2,0) is (2,2,1.2)/0.5 = (4,4,2.4).
  CHECK(votes.at(4, 4, 2, 2) == 1);
}

TEST_CASE("vote accumulation matches a naive per-pixel oracle") {
  std::mt19937_64 rng(51u);
  const CameraIntrinsics k = small_camera();
  for (int trial = 0; trial < 10; ++trial) {
    VoxelGridConfig cfg = small_grid(3);
    if (trial % 2 == 1) {
      cfg.include_moving = false;
      cfg.moving_classes = {1};
    }
    std::vector<FusionFrame> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(random_frame(rng, k, 3));
    const VoteGrid got = accumulate_votes(frames, cfg);
    const VoteGrid want = naive_votes(frames, cfg);
    REQUIRE(got.votes.size() == want.votes.size());
    CHECK(got.votes == want.votes);

    // Vote conservation: every usable pixel that lands inside the grid casts
    // exactly one vote.
    uint64_t usable = 0;
    for (const FusionFrame& f : frames) {
      for (int v = 0; v < f.depth.height; ++v) {
        for (int u = 0; u < f.depth.width; ++u) {
          if (!f.valid.at(v, u)) continue;
          const int32_t label = f.semantics.at(v, u);
          if (label == kVoidLabel) continue;
          if (!cfg.include_moving && cfg.moving_classes.count(label)) continue;
          const Eigen::Vector3d point = f.pose.apply(backproject(
              {double(u), double(v)}, f.depth.at(v, u), f.intrinsics));
          if (point_to_voxel(point, cfg)) ++usable;
        }
      }
    }
    CHECK(got.total() == usable);
  }
}

TEST_CASE("fusion is independent of frame order") {
  std::mt19937_64 rng(52u);
  const CameraIntrinsics k = small_camera();
  const VoxelGridConfig cfg = small_grid(4);
  std::vector<FusionFrame> frames;
  for (int i = 0; i < 4; ++i) frames.push_back(random_frame(rng, k, 4));
  const FuseResult forward = fuse(frames, cfg);
  std::reverse(frames.begin(), frames.end());
  const FuseResult backward = fuse(frames, cfg);
  CHECK(forward.votes.votes == backward.votes.votes);
  CHECK(forward.grid.labels == backward.grid.labels);
}

TEST_CASE("majority vote picks the arg-max and breaks ties low") {
  VoxelGridConfig cfg = small_grid(3);
  VoteGrid votes(cfg.dims, cfg.num_classes);
  votes.at(0, 0, 0, 0) = 2;
  votes.at(0, 0, 0, 1) = 5;   // clear winner
  votes.at(1, 0, 0, 1) = 3;
  votes.at(1, 0, 0, 2) = 3;   // tie between classes 1 and 2
  votes.at(2, 0, 0, 2) = 1;   // lone vote

  const VoxelGrid grid = argmax_votes(votes, cfg);
  CHECK(grid.at(0, 0, 0) == 1);
  CHECK(grid.at(1, 0, 0) == 1);  // lowest index wins the tie
  CHECK(grid.at(2, 0, 0) == 2);
  CHECK(grid.at(3, 3, 3) == kFreeLabel);  // untouched voxel stays free
}

TEST_CASE("the vote threshold filters weak majorities") {
  VoxelGridConfig cfg = small_grid(2);
  cfg.min_votes = 3;
  VoteGrid votes(cfg.dims, cfg.num_classes);
  votes.at(0, 0, 0, 0) = 2;  // below threshold
  votes.at(1, 0, 0, 1) = 3;  // exactly at threshold
  const VoxelGrid grid = argmax_votes(votes, cfg);
  CHECK(grid.at(0, 0, 0) == kFreeLabel);
  CHECK(grid.at(1, 0, 0) == 1);
}

TEST_CASE("moving classes are skipped when excluded by policy") {
  VoxelGridConfig cfg = small_grid(3);
  cfg.include_moving = false;
  cfg.moving_classes = {2};

  CameraIntrinsics k = small_camera();
  k.width = 2;
  k.height = 1;
  k.cx = 0.5;
  k.cy = 0.0;
  FusionFrame f;
  f.depth = MetricDepthMap(1, 2, 1.0);
  f.valid = ValidityMask(1, 2, true);
  f.semantics = SemanticMap(1, 2, 3);
  f.semantics.at(0, 0) = 2;  // moving: dropped
  f.semantics.at(0, 1) = 1;  // static: kept
  f.intrinsics = k;
  f.pose = identity_pose();

  const VoteGrid votes = accumulate_votes({f}, cfg);
  CHECK(votes.total() == 1);

  cfg.include_moving = true;
  const VoteGrid all_votes = accumulate_votes({f}, cfg);
  CHECK(all_votes.total() == 2);
}

TEST_CASE("labeled voxel centers round-trip through point_to_voxel") {
  std::mt19937_64 rng(53u);
  const VoxelGridConfig cfg = small_grid(3);
  VoxelGrid grid(cfg.dims);
  std::uniform_int_distribution<int> label(-1, 2);
  for (int32_t& v : grid.labels) v = label(rng);

  const std::vector<LabeledPoint> points = grid_to_points(grid, cfg);
  size_t occupied = 0;
  for (const int32_t v : grid.labels) occupied += (v != kFreeLabel);
  REQUIRE(points.size() == occupied);

  for (const LabeledPoint& p : points) {
    const auto idx = point_to_voxel(p.position, cfg);
    REQUIRE(idx.has_value());
    CHECK(grid.at((*idx)[0], (*idx)[1], (*idx)[2]) == p.label);
  }
}

TEST_CASE("grid configuration validation rejects nonsense") {
  VoxelGridConfig cfg = small_grid(2);
  CHECK_NOTHROW(cfg.validate());
  VoxelGridConfig bad = cfg;
  bad.cell_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.dims = {0, 4, 4};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.num_classes = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.min_votes = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.moving_classes = {5};  // outside [0, K)
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("frames with mismatched shapes are rejected") {
  const VoxelGridConfig cfg = small_grid(2);
  const CameraIntrinsics k = small_camera();
  FusionFrame f;
  f.depth = MetricDepthMap(k.height, k.width, 1.0);
  f.valid = ValidityMask(k.height, k.width - 1, true);  // wrong width
  f.semantics = SemanticMap(k.height, k.width, 2);
  f.intrinsics = k;
  f.pose = identity_pose();
  CHECK_THROWS_AS(accumulate_votes({f}, cfg), Error);
}
