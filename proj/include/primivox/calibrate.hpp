// Two-stage recovery of the affine transform that lifts relative depth to
// metric depth:  d(p) = lambda(p) * d_rel(p) + gamma.
//
// Stage 1 sweeps an integer scale grid, scoring each candidate by the
// photometric error of target pixels warped into the source views. Stage 2
// promotes the scalar to a per-pixel field and refines (lambda, gamma) by
// first-order optimization of a photometric + structural-similarity
// objective, using exact analytic gradients through the warp, the bilinear
// resampler, and both loss terms.
#pragma once

#include <set>
#include <vector>

#include "primivox/depth.hpp"
#include "primivox/geometry.hpp"
#include "primivox/image.hpp"
#include "primivox/imgproc.hpp"
#include "primivox/semantics.hpp"

namespace primivox {

// How the structural term enters the total loss.
enum class SsimForm {
  kNegative,      // w * (-ssim), in [-w, w]
  kOneMinusHalf,  // w * (1 - ssim) / 2, in [0, w]
};

struct CalibConfig {
  int scale_min = 1;
  int scale_max = 100;
  int iterations = 5000;
  double learning_rate = 1e-5;
  double weight_decay = 0.0;       // decoupled, applied to lambda and gamma
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double w_rec = 0.5;              // photometric weight
  double w_ssim = 0.5;             // structural weight
  double min_depth = 1e-3;         // meters; below this a pixel is invalid
  bool mask_in_stage1 = true;      // apply the static mask during the sweep
  SsimForm ssim_form = SsimForm::kNegative;

  void validate() const;
};

// A target view with everything needed to calibrate its depth.
struct SourceView {
  Image image;
  Pose pose;  // camera-to-world
};

struct FrameBundle {
  Image target;
  CameraIntrinsics intrinsics;
  Pose target_pose;             // camera-to-world
  std::vector<SourceView> sources;
  RelativeDepthMap rel_depth;
  ValidityMask static_mask;     // true = usable for the loss

  void validate() const;
};

// Optimization state: the per-pixel scale field, the scalar offset, and the
// first/second moment accumulators of the optimizer.
struct CalibState {
  int height = 0;
  int width = 0;
  std::vector<double> lambda;  // row-major
  double gamma = 0.0;
  std::vector<double> m_lambda, v_lambda;
  double m_gamma = 0.0, v_gamma = 0.0;
  int step = 0;

  static CalibState init(int height, int width, double scale);

  double lambda_at(int v, int u) const {
    return lambda[static_cast<size_t>(v) * width + u];
  }
};

struct AffineDepth {
  MetricDepthMap depth;
  ValidityMask valid;  // false where depth < min_depth
};

// Applies the affine model pointwise. Out-of-range pixels are marked invalid
// in the companion mask, never clamped.
AffineDepth apply_affine(const RelativeDepthMap& rel,
                         const std::vector<double>& lambda, double gamma,
                         double min_depth);
AffineDepth apply_affine(const RelativeDepthMap& rel, const CalibState& state,
                         double min_depth);

struct SynthesisResult {
  Image image;         // synthesized target view, zeros where invalid
  ValidityMask valid;  // pixel warped in-bounds in front of the source camera
};

// Warps each depth_valid target pixel into source view `source_index` via the
// given depth and resamples the source image there. Masking policy is the
// caller's: pass depth_valid already intersected with any static mask.
SynthesisResult synthesize_view(const FrameBundle& bundle,
                                const MetricDepthMap& depth,
                                const ValidityMask& depth_valid,
                                int source_index);

struct ScaleSearchResult {
  int scale_hat = 0;
  std::vector<double> losses;  // one per candidate scale, +inf when unusable
  bool flat_curve = false;     // loss landscape carried no signal
};

// Stage 1: integer sweep over [scale_min, scale_max] of the summed
// photometric error across source views; ties resolve to the smaller scale.
ScaleSearchResult scene_scale_search(const FrameBundle& bundle,
                                     const CalibConfig& cfg);

// Total objective at the given state: mean over source views of
// w_rec * photometric + w_ssim * structural term (per cfg.ssim_form).
double total_loss(const FrameBundle& bundle, const CalibState& state,
                  const CalibConfig& cfg);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> d_lambda;  // same layout as CalibState::lambda
  double d_gamma = 0.0;
};

// Exact gradient of total_loss with respect to lambda and gamma. Pixels that
// do not reach the loss (masked, invalid depth, out of bounds, behind the
// source camera) have exactly zero lambda-gradient.
LossGradient loss_gradient(const FrameBundle& bundle, const CalibState& state,
                           const CalibConfig& cfg);

struct RefineResult {
  CalibState state;
  // losses[i] is the objective before step i; one trailing entry holds the
  // final objective. Empty when iterations == 0.
  std::vector<double> losses;
};

// Stage 2: first-order refinement from lambda = scale_hat, gamma = 0, with
// bias-corrected moment estimates, decoupled weight decay, and a 1e-6 floor
// on lambda after every step. Aborts with a divergence error when the loss
// goes non-finite.
RefineResult refine(const FrameBundle& bundle, double scale_hat,
                    const CalibConfig& cfg);

// True where the pixel's label is NOT one of the moving classes: the static
// scene usable for photometric supervision.
ValidityMask moving_object_mask(const SemanticMap& semantics,
                                const std::set<int>& moving_classes);

}  // namespace primivox
