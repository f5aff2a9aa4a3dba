// Analytic test scenes with exact ground truth. A scene is a textured ground
// plane plus axis-aligned boxes; rays intersect it in closed form, so every
// rendered pixel carries exact depth and semantics. The same module corrupts
// ground-truth depth into relative depth with a known affine transform, which
// makes recovery errors directly measurable.
//
// World frame: z up, ground at z = ground_height. Camera frame: x right,
// y down, z forward (so a pitched-down camera sees the plane fill the image).
#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "primivox/calibrate.hpp"
#include "primivox/depth.hpp"
#include "primivox/geometry.hpp"
#include "primivox/image.hpp"
#include "primivox/semantics.hpp"

namespace primivox {

struct TextureSpec {
  int pattern = 0;         // 0 = two-octave waves, 1 = weave, 2 = stripes
  double frequency = 0.2;  // cycles per meter of the base octave
};

struct SceneBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();
  int label = 0;
  TextureSpec texture{1, 0.8};
  bool moving = false;
  Eigen::Vector3d motion = Eigen::Vector3d::Zero();  // displacement per step
};

// How the ground-truth scale field lambda*(p) varies over the image.
struct LambdaSpec {
  enum class Kind { kConstant, kSinusoidal };
  Kind kind = Kind::kConstant;
  double base = 1.0;
  double amplitude = 0.0;  // fraction of base, sinusoidal only
  double cycles_u = 1.0;   // full cycles across the image width
  double cycles_v = 0.0;   // full cycles across the image height
  double phase = 0.0;
};

struct SceneSpec {
  CameraIntrinsics intrinsics;
  Pose target_pose;
  std::vector<Pose> source_poses;

  double ground_height = 0.0;
  int ground_label = 0;
  TextureSpec ground_texture{0, 0.2};
  std::vector<SceneBox> boxes;

  double max_distance = 60.0;       // rays hitting beyond this are sky
  double background = 0.5;          // sky intensity, all channels
  uint64_t seed = 0;                // drives texture phases

  LambdaSpec lambda_star;           // ground-truth scale field
  double gamma_star = 0.0;          // ground-truth offset
  std::set<int> moving_classes;     // labels masked out of the loss

  int num_classes() const;

  // Rejects camera/texture combinations whose texture would alias at the
  // rendered resolution (base-octave harmonics past half the sampling rate).
  void validate() const;
};

// Camera-to-world pose from a position, a heading (yaw, degrees, about world
// z from +x), and a downward pitch (degrees).
Pose look_pose(const Eigen::Vector3d& position, double yaw_deg,
               double pitch_deg);

struct RenderResult {
  Image image;            // 3 channels in [0, 1]
  MetricDepthMap depth;   // camera-frame z, 0 where sky
  ValidityMask hit;       // false where the ray escaped to the sky
  SemanticMap semantics;  // surface labels, VOID where sky
};

// Ray-traces the scene from `pose`. Moving boxes are displaced by
// displacement_steps * motion, which make_bundle uses to give each source
// view its own object position.
RenderResult render(const SceneSpec& spec, const Pose& pose,
                    int displacement_steps = 0);

// Ground-truth scale field for the spec's image size, row-major.
std::vector<double> lambda_star_field(const LambdaSpec& spec, int height,
                                      int width);

// Inverts the affine depth model: rel = (depth - gamma) / lambda per valid
// pixel (0 elsewhere). Throws when a valid pixel would get a non-positive
// relative depth.
RelativeDepthMap corrupt_to_relative(const MetricDepthMap& depth,
                                     const ValidityMask& valid,
                                     const std::vector<double>& lambda,
                                     double gamma);

struct BundleTruth {
  FrameBundle bundle;
  MetricDepthMap gt_depth;
  ValidityMask gt_valid;
  SemanticMap gt_semantics;
  std::vector<double> lambda_star;
  double gamma_star = 0.0;
};

// Renders target and source views, corrupts the target depth with the
// ground-truth affine transform, and assembles a calibration-ready bundle
// (static mask = hit pixels not labeled with a moving class).
BundleTruth make_bundle(const SceneSpec& spec);

// Canonical desk-scale rig: pitched-down camera over a textured plane with
// two laterally offset source views. Tests build scenes from this base.
SceneSpec make_default_scene(uint64_t seed);

}  // namespace primivox
