// On-disk interchange: typed adapters between in-memory containers and the
// binary tensor format, plain-text camera records, and the JSON manifest that
// ties a directory of per-frame files into calibration-ready bundles.
//
// File conventions:
//   images           float32 (H, W, C), values in [0, 1]
//   depth maps       float32 (H, W), meters (or relative units)
//   validity masks   uint8   (H, W), 0 or 1
//   semantic maps    uint8   (H, W), 255 = VOID
//   voxel grids      uint8   (X, Y, Z), 255 = FREE
//   vote grids       uint16  (X, Y, Z, K)
//   scalar fields    float32 (H, W); curves float32 (N)
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "primivox/calibrate.hpp"
#include "primivox/depth.hpp"
#include "primivox/geometry.hpp"
#include "primivox/image.hpp"
#include "primivox/semantics.hpp"
#include "primivox/tensor_io.hpp"
#include "primivox/voxelfuse.hpp"

namespace primivox {

inline constexpr uint8_t kVoidByte = 255;  // VOID / FREE sentinel on disk

Tensor image_to_tensor(const Image& img);
Image image_from_tensor(const Tensor& t);

Tensor depth_to_tensor(const MetricDepthMap& depth);
MetricDepthMap depth_from_tensor(const Tensor& t);

Tensor rel_depth_to_tensor(const RelativeDepthMap& rel);
RelativeDepthMap rel_depth_from_tensor(const Tensor& t,
                                       DepthConvention convention);

Tensor mask_to_tensor(const ValidityMask& mask);
ValidityMask mask_from_tensor(const Tensor& t);

Tensor semantic_to_tensor(const SemanticMap& map);
SemanticMap semantic_from_tensor(const Tensor& t, int num_classes);

Tensor voxel_to_tensor(const VoxelGrid& grid);
VoxelGrid voxel_from_tensor(const Tensor& t);

Tensor votes_to_tensor(const VoteGrid& votes);  // throws on uint16 overflow
VoteGrid votes_from_tensor(const Tensor& t);

Tensor field_to_tensor(const std::vector<double>& field, int height,
                       int width);
std::vector<double> field_from_tensor(const Tensor& t, int* height,
                                      int* width);

Tensor curve_to_tensor(const std::vector<double>& values);
std::vector<double> curve_from_tensor(const Tensor& t);

// ---------------------------------------------------------------------------
// Camera records: one "key: value" line per field, doubles as %.17g so a
// save/load round trip is bit-exact.

struct CameraRecord {
  CameraIntrinsics intrinsics;
  Pose pose;  // camera-to-world
};

void save_camera(const std::string& path, const CameraRecord& cam);
CameraRecord load_camera(const std::string& path);

// Generic "key: value" table used for small metadata files.
void save_kv(const std::string& path,
             const std::vector<std::pair<std::string, std::string>>& rows);
std::map<std::string, std::string> load_kv(const std::string& path);
std::string format_double(double value);  // %.17g
double parse_double(const std::string& text);

// Atomic text write shared by every writer: temp file + rename.
void write_text_atomic(const std::string& path, const std::string& content);

// ---------------------------------------------------------------------------
// Frame manifest: JSON index of the per-frame files in a dataset directory.

struct FrameEntry {
  std::string name;
  std::string image;             // paths relative to the manifest directory
  std::string camera;
  std::string rel_depth;         // empty when the frame is source-only
  DepthConvention depth_convention = DepthConvention::kDepth;
  std::string semantics;         // empty when absent
  int num_classes = 0;           // required when semantics is set
  std::string static_mask;       // empty when absent
  std::vector<std::string> sources;  // names of this frame's source views

  bool calibratable() const { return !rel_depth.empty() && !sources.empty(); }
};

struct FrameManifest {
  std::vector<FrameEntry> frames;
  std::string root;  // directory containing the manifest file

  static FrameManifest load(const std::string& path);
  void save(const std::string& path) const;

  const FrameEntry& find(const std::string& name) const;
  std::string resolve(const std::string& relative_path) const;
};

// Loads everything a frame entry references and assembles the bundle. When
// the entry has no static-mask file, the mask is derived from the semantic
// map and `moving_classes` (all-true when there are no semantics either).
FrameBundle load_bundle(const FrameManifest& manifest, const FrameEntry& entry,
                        const std::set<int>& moving_classes);

}  // namespace primivox
