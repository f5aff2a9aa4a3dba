#include "primivox/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace primivox {

namespace {

constexpr double kLambdaFloor = 1e-6;

ValidityMask mask_and(const ValidityMask& a, const ValidityMask& b) {
  ValidityMask out(a.height, a.width, false);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (a.data[i] != 0 && b.data[i] != 0) ? 1 : 0;
  }
  return out;
}

// Synthesized target view plus (optionally) the derivative of every sampled
// value with respect to the pixel's metric depth, chained through the warp
// and the bilinear resampler.
struct SynthJacobian {
  Image image;
  ValidityMask valid;
  std::vector<std::array<double, 3>> dvalue_ddepth;
};

SynthJacobian synthesize_impl(const FrameBundle& bundle,
                              const MetricDepthMap& depth,
                              const ValidityMask& usable, int source_index,
                              bool want_jacobian) {
  if (source_index < 0 ||
      source_index >= static_cast<int>(bundle.sources.size())) {
    throw Error(ErrorCode::kRange, "source index out of range");
  }
  const SourceView& src = bundle.sources[source_index];
  const CameraIntrinsics& intr = bundle.intrinsics;
  const int h = bundle.target.height;
  const int w = bundle.target.width;
  if (depth.height != h || depth.width != w || usable.height != h ||
      usable.width != w) {
    throw Error(ErrorCode::kDimension, "depth shape differs from target");
  }

  // Relative motion, used for the depth-derivative of the warp:
  //   X_src = d * (R_rel * dir) + t_rel.
  const Eigen::Matrix3d r_rel =
      src.pose.rotation.transpose() * bundle.target_pose.rotation;
  const Eigen::Vector3d t_rel =
      src.pose.rotation.transpose() *
      (bundle.target_pose.translation - src.pose.translation);

  SynthJacobian out;
  out.image = Image(h, w, bundle.target.channels, 0.0);
  out.valid = ValidityMask(h, w, false);
  if (want_jacobian) {
    out.dvalue_ddepth.assign(static_cast<size_t>(h) * w, {});
  }

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!usable.at(v, u)) continue;
      const double d = depth.at(v, u);
      const PixelCoord p{static_cast<double>(u), static_cast<double>(v)};
      const WarpResult warp =
          warp_pixel(p, d, intr, bundle.target_pose, src.pose);
      if (warp.behind_camera) continue;
      const SampleValue sample = bilinear_sample(src.image, warp.pixel);
      if (!sample.in_bounds) continue;
      out.valid.set(v, u, true);
      for (int c = 0; c < out.image.channels; ++c) {
        out.image.at(v, u, c) = sample.value[c];
      }
      if (!want_jacobian) continue;
      const Eigen::Vector3d dir((u - intr.cx) / intr.fx,
                                (v - intr.cy) / intr.fy, 1.0);
      const Eigen::Vector3d m = r_rel * dir;
      const double z = warp.depth;
      const double du_dd =
          intr.fx * (m.x() * t_rel.z() - t_rel.x() * m.z()) / (z * z);
      const double dv_dd =
          intr.fy * (m.y() * t_rel.z() - t_rel.y() * m.z()) / (z * z);
      const SampleGrad grad = bilinear_sample_grad(src.image, warp.pixel);
      auto& dv_out = out.dvalue_ddepth[static_cast<size_t>(v) * w + u];
      for (int c = 0; c < out.image.channels; ++c) {
        dv_out[c] = grad.du[c] * du_dd + grad.dv[c] * dv_dd;
      }
    }
  }
  return out;
}

// Shared objective evaluator. The loss is the mean over source views of
//   w_rec * photometric + w_ssim * structural_term(cfg.ssim_form),
// and (optionally) its derivative with respect to each pixel's metric depth.
struct EvalOutput {
  double loss = 0.0;
  std::vector<double> dloss_ddepth;  // empty unless want_grad
};

EvalOutput evaluate_objective(const FrameBundle& bundle,
                              const std::vector<double>& lambda, double gamma,
                              const CalibConfig& cfg, bool want_grad) {
  const int h = bundle.target.height;
  const int w = bundle.target.width;
  const int channels = bundle.target.channels;
  const AffineDepth affine =
      apply_affine(bundle.rel_depth, lambda, gamma, cfg.min_depth);
  const ValidityMask usable = mask_and(bundle.static_mask, affine.valid);

  EvalOutput out;
  if (want_grad) {
    out.dloss_ddepth.assign(static_cast<size_t>(h) * w, 0.0);
  }
  double loss_sum = 0.0;
  for (int s = 0; s < static_cast<int>(bundle.sources.size()); ++s) {
    const SynthJacobian syn =
        synthesize_impl(bundle, affine.depth, usable, s, want_grad);
    const int n = syn.valid.count();
    if (n == 0) {
      throw Error(ErrorCode::kDegenerateLoss,
                  "source view " + std::to_string(s) +
                      " received no valid warped pixel");
    }
    const double rec = photometric_loss(bundle.target, syn.image, syn.valid);

    double ssim_term = 0.0;
    double ssim_factor = 0.0;
    Image ssim_grad;
    if (cfg.w_ssim != 0.0) {
      if (want_grad) {
        SsimLossGrad sg =
            ssim_loss_and_grad(bundle.target, syn.image, syn.valid);
        ssim_term = sg.loss;
        ssim_grad = std::move(sg.grad);
      } else {
        ssim_term = -ssim(bundle.target, syn.image, syn.valid);
      }
      if (cfg.ssim_form == SsimForm::kOneMinusHalf) {
        ssim_term = (1.0 + ssim_term) / 2.0;
        ssim_factor = 0.5;
      } else {
        ssim_factor = 1.0;
      }
    }
    loss_sum += cfg.w_rec * rec + cfg.w_ssim * ssim_term;

    if (!want_grad) continue;
    const double rec_scale =
        cfg.w_rec / (static_cast<double>(n) * channels);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        if (!syn.valid.at(v, u)) continue;
        const auto& dval =
            syn.dvalue_ddepth[static_cast<size_t>(v) * w + u];
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
          const double diff = syn.image.at(v, u, c) - bundle.target.at(v, u, c);
          const double sgn = (diff > 0.0) ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          double dloss_dval = rec_scale * sgn;
          if (cfg.w_ssim != 0.0) {
            dloss_dval += cfg.w_ssim * ssim_factor * ssim_grad.at(v, u, c);
          }
          acc += dloss_dval * dval[c];
        }
        out.dloss_ddepth[static_cast<size_t>(v) * w + u] += acc;
      }
    }
  }
  const double num_sources = static_cast<double>(bundle.sources.size());
  out.loss = loss_sum / num_sources;
  if (want_grad) {
    for (double& g : out.dloss_ddepth) g /= num_sources;
  }
  return out;
}

}  // namespace

void CalibConfig::validate() const {
  if (scale_min < 1 || scale_max < scale_min) {
    throw Error(ErrorCode::kConfig, "scale grid must satisfy 1 <= min <= max");
  }
  if (iterations < 0) {
    throw Error(ErrorCode::kConfig, "iterations must be non-negative");
  }
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kConfig, "learning rate must be positive finite");
  }
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) {
    throw Error(ErrorCode::kConfig, "weight decay must be non-negative");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw Error(ErrorCode::kConfig, "moment decays must lie in [0, 1)");
  }
  if (!(epsilon > 0)) {
    throw Error(ErrorCode::kConfig, "epsilon must be positive");
  }
  if (!(w_rec >= 0) || !(w_ssim >= 0) || w_rec + w_ssim <= 0) {
    throw Error(ErrorCode::kConfig,
                "loss weights must be non-negative with a positive sum");
  }
  if (!(min_depth > 0) || !std::isfinite(min_depth)) {
    throw Error(ErrorCode::kConfig, "min_depth must be positive finite");
  }
}

void FrameBundle::validate() const {
  intrinsics.validate();
  target_pose.validate();
  if (target.height != intrinsics.height || target.width != intrinsics.width) {
    throw Error(ErrorCode::kDimension,
                "target image dims differ from intrinsics");
  }
  if (sources.empty()) {
    throw Error(ErrorCode::kDimension, "bundle needs at least one source");
  }
  for (const SourceView& s : sources) {
    s.pose.validate();
    if (!s.image.same_shape(target)) {
      throw Error(ErrorCode::kDimension, "source image shape differs");
    }
  }
  if (rel_depth.height != target.height || rel_depth.width != target.width) {
    throw Error(ErrorCode::kDimension, "relative depth shape differs");
  }
  if (static_mask.height != target.height ||
      static_mask.width != target.width) {
    throw Error(ErrorCode::kDimension, "static mask shape differs");
  }
  for (double d : rel_depth.data) {
    if (!std::isfinite(d) || d < 0) {
      throw Error(ErrorCode::kDomain,
                  "relative depth must be finite and non-negative");
    }
  }
}

CalibState CalibState::init(int height, int width, double scale) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::kDimension, "state dims must be positive");
  }
  CalibState st;
  st.height = height;
  st.width = width;
  const size_t n = static_cast<size_t>(height) * width;
  st.lambda.assign(n, std::max(scale, kLambdaFloor));
  st.m_lambda.assign(n, 0.0);
  st.v_lambda.assign(n, 0.0);
  return st;
}

AffineDepth apply_affine(const RelativeDepthMap& rel,
                         const std::vector<double>& lambda, double gamma,
                         double min_depth) {
  const size_t n = static_cast<size_t>(rel.height) * rel.width;
  if (lambda.size() != n) {
    throw Error(ErrorCode::kDimension, "lambda field size mismatch");
  }
  if (!(min_depth > 0)) {
    throw Error(ErrorCode::kConfig, "min_depth must be positive");
  }
  AffineDepth out;
  out.depth = MetricDepthMap(rel.height, rel.width);
  out.valid = ValidityMask(rel.height, rel.width, false);
  for (size_t i = 0; i < n; ++i) {
    const double d = lambda[i] * rel.data[i] + gamma;
    out.depth.data[i] = d;
    out.valid.data[i] = (std::isfinite(d) && d >= min_depth) ? 1 : 0;
  }
  return out;
}

AffineDepth apply_affine(const RelativeDepthMap& rel, const CalibState& state,
                         double min_depth) {
  return apply_affine(rel, state.lambda, state.gamma, min_depth);
}

SynthesisResult synthesize_view(const FrameBundle& bundle,
                                const MetricDepthMap& depth,
                                const ValidityMask& depth_valid,
                                int source_index) {
  SynthJacobian syn =
      synthesize_impl(bundle, depth, depth_valid, source_index, false);
  return SynthesisResult{std::move(syn.image), std::move(syn.valid)};
}

ScaleSearchResult scene_scale_search(const FrameBundle& bundle,
                                     const CalibConfig& cfg) {
  cfg.validate();
  bundle.validate();
  const size_t n = bundle.rel_depth.data.size();
  const ValidityMask no_mask(bundle.target.height, bundle.target.width, true);
  const ValidityMask& mask =
      cfg.mask_in_stage1 ? bundle.static_mask : no_mask;

  ScaleSearchResult out;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lambda(n);
  for (int s = cfg.scale_min; s <= cfg.scale_max; ++s) {
    std::fill(lambda.begin(), lambda.end(), static_cast<double>(s));
    const AffineDepth affine =
        apply_affine(bundle.rel_depth, lambda, 0.0, cfg.min_depth);
    const ValidityMask usable = mask_and(mask, affine.valid);
    double total = 0.0;
    bool ok = true;
    for (int src = 0; src < static_cast<int>(bundle.sources.size()); ++src) {
      const SynthesisResult syn =
          synthesize_view(bundle, affine.depth, usable, src);
      if (syn.valid.count() == 0) {
        ok = false;
        break;
      }
      total += photometric_loss(bundle.target, syn.image, syn.valid);
    }
    out.losses.push_back(ok ? total : inf);
  }

  int best_index = -1;
  double best = inf;
  double finite_min = inf, finite_max = -inf;
  for (size_t i = 0; i < out.losses.size(); ++i) {
    const double loss = out.losses[i];
    if (!std::isfinite(loss)) continue;
    finite_min = std::min(finite_min, loss);
    finite_max = std::max(finite_max, loss);
    if (loss < best) {  // strict: ties keep the smaller scale
      best = loss;
      best_index = static_cast<int>(i);
    }
  }
  if (best_index < 0) {
    throw Error(ErrorCode::kDegenerateLoss,
                "no candidate scale produced a valid warp");
  }
  out.scale_hat = cfg.scale_min + best_index;
  out.flat_curve =
      (finite_max - finite_min) <= 1e-12 * std::max(1.0, std::abs(finite_min));
  if (out.flat_curve && std::isfinite(out.losses.front())) {
    // A flat curve carries no scale information (e.g. coincident poses);
    // the noise-level argmin would be arbitrary, so report the grid minimum.
    out.scale_hat = cfg.scale_min;
  }
  return out;
}

double total_loss(const FrameBundle& bundle, const CalibState& state,
                  const CalibConfig& cfg) {
  cfg.validate();
  bundle.validate();
  return evaluate_objective(bundle, state.lambda, state.gamma, cfg, false)
      .loss;
}

LossGradient loss_gradient(const FrameBundle& bundle, const CalibState& state,
                           const CalibConfig& cfg) {
  cfg.validate();
  bundle.validate();
  EvalOutput eval =
      evaluate_objective(bundle, state.lambda, state.gamma, cfg, true);
  LossGradient out;
  out.loss = eval.loss;
  out.d_lambda.assign(eval.dloss_ddepth.size(), 0.0);
  out.d_gamma = 0.0;
  // Chain rule through d(p) = lambda(p) * rel(p) + gamma.
  for (size_t i = 0; i < eval.dloss_ddepth.size(); ++i) {
    const double dd = eval.dloss_ddepth[i];
    out.d_lambda[i] = dd * bundle.rel_depth.data[i];
    out.d_gamma += dd;
  }
  return out;
}

RefineResult refine(const FrameBundle& bundle, double scale_hat,
                    const CalibConfig& cfg) {
  cfg.validate();
  bundle.validate();
  RefineResult out;
  out.state =
      CalibState::init(bundle.target.height, bundle.target.width, scale_hat);
  if (cfg.iterations == 0) return out;

  CalibState& st = out.state;
  const size_t n = st.lambda.size();
  out.losses.reserve(static_cast<size_t>(cfg.iterations) + 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    const LossGradient grad = loss_gradient(bundle, st, cfg);
    if (!std::isfinite(grad.loss)) {
      throw Error(ErrorCode::kDivergence,
                  "non-finite loss at iteration " + std::to_string(it));
    }
    out.losses.push_back(grad.loss);

    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, st.step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, st.step);
    for (size_t i = 0; i < n; ++i) {
      const double g = grad.d_lambda[i];
      st.m_lambda[i] = cfg.beta1 * st.m_lambda[i] + (1.0 - cfg.beta1) * g;
      st.v_lambda[i] = cfg.beta2 * st.v_lambda[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = st.m_lambda[i] / bc1;
      const double v_hat = st.v_lambda[i] / bc2;
      st.lambda[i] -=
          cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) +
                               cfg.weight_decay * st.lambda[i]);
      if (st.lambda[i] < kLambdaFloor) st.lambda[i] = kLambdaFloor;
    }
    {
      const double g = grad.d_gamma;
      st.m_gamma = cfg.beta1 * st.m_gamma + (1.0 - cfg.beta1) * g;
      st.v_gamma = cfg.beta2 * st.v_gamma + (1.0 - cfg.beta2) * g * g;
      const double m_hat = st.m_gamma / bc1;
      const double v_hat = st.v_gamma / bc2;
      st.gamma -=
          cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) +
                               cfg.weight_decay * st.gamma);
    }
  }
  const double final_loss = total_loss(bundle, st, cfg);
  if (!std::isfinite(final_loss)) {
    throw Error(ErrorCode::kDivergence,
                "non-finite loss after final iteration");
  }
  out.losses.push_back(final_loss);
  return out;
}

ValidityMask moving_object_mask(const SemanticMap& semantics,
                                const std::set<int>& moving_classes) {
  ValidityMask mask(semantics.height, semantics.width, true);
  for (size_t i = 0; i < semantics.labels.size(); ++i) {
    const int32_t label = semantics.labels[i];
    if (label != kVoidLabel && moving_classes.count(label)) {
      mask.data[i] = 0;
    }
  }
  return mask;
}

}  // namespace primivox
