#include "primivox/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace primivox {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEps = 1e-9;
// Highest harmonic any pattern emits, relative to its base frequency.
constexpr double kOctaveFactor = 3.7;

// Deterministic 64-bit mixer; keeps texture phases reproducible without
// dragging a stateful generator through the renderer.
uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from (seed, surface, salt).
double hash_unit(uint64_t seed, uint64_t surface, uint64_t salt) {
  const uint64_t h = mix64(seed ^ mix64(surface * 0x9e3779b97f4a7c15ULL + salt));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

struct SurfaceShading {
  TextureSpec texture;
  uint64_t surface_id;
};

// View-independent procedural texture evaluated at a world point. All
// patterns stay within [0.1, 0.9] so rendered images respect the [0, 1]
// range with margin.
double shade(const SceneSpec& spec, const SurfaceShading& surf,
             const Eigen::Vector3d& point, int channel) {
  const uint64_t sid = surf.surface_id;
  const double f = surf.texture.frequency;
  const double phase1 =
      2.0 * kPi * hash_unit(spec.seed, sid, 11 + 2 * channel);
  const double phase2 =
      2.0 * kPi * hash_unit(spec.seed, sid, 12 + 2 * channel);
  switch (surf.texture.pattern) {
    case 0: {  // two-octave waves along hashed directions
      const double theta1 = 2.0 * kPi * hash_unit(spec.seed, sid, 1);
      const double theta2 =
          theta1 + kPi / 2.0 + hash_unit(spec.seed, sid, 2) - 0.5;
      const Eigen::Vector3d a1 =
          Eigen::Vector3d(std::cos(theta1), std::sin(theta1), 0.25)
              .normalized();
      const Eigen::Vector3d a2 =
          Eigen::Vector3d(std::cos(theta2), std::sin(theta2), -0.3)
              .normalized();
      return 0.5 +
             0.22 * std::sin(2.0 * kPi * f * a1.dot(point) + phase1) +
             0.18 * std::sin(2.0 * kPi * kOctaveFactor * f * a2.dot(point) +
                             phase2);
    }
    case 1: {  // weave: product of two waves, varying along every axis
      const double wx = point.x() + 0.5 * point.z();
      const double wy = point.y() + 0.5 * point.z();
      return 0.5 + 0.35 * std::sin(2.0 * kPi * f * wx + phase1) *
                       std::sin(2.0 * kPi * f * wy + phase2);
    }
    case 2: {  // diagonal stripes
      const double s = point.x() + point.y() + point.z();
      return 0.5 + 0.3 * std::sin(2.0 * kPi * f * s + phase1);
    }
    default:
      throw Error(ErrorCode::kConfig, "unknown texture pattern");
  }
}

double pattern_harmonic(const TextureSpec& t) {
  return (t.pattern == 0) ? kOctaveFactor * t.frequency : t.frequency;
}

// Ray/axis-aligned-box intersection (slab method). Returns the entry
// distance, or nullopt on a miss or when the origin is inside the box.
std::optional<double> intersect_box(const Ray& ray,
                                    const Eigen::Vector3d& lo,
                                    const Eigen::Vector3d& hi) {
  double t_enter = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (o < lo[a] || o > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o) / d;
    double tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t_enter = std::max(t_enter, ta);
    t_exit = std::min(t_exit, tb);
  }
  if (t_enter > t_exit || t_enter <= kRayEps) return std::nullopt;
  return t_enter;
}

Eigen::Vector3d box_center_at(const SceneBox& box, int displacement_steps) {
  if (!box.moving || displacement_steps == 0) return box.center;
  return box.center + static_cast<double>(displacement_steps) * box.motion;
}

}  // namespace

int SceneSpec::num_classes() const {
  int k = ground_label;
  for (const SceneBox& b : boxes) k = std::max(k, b.label);
  return k + 1;
}

void SceneSpec::validate() const {
  intrinsics.validate();
  target_pose.validate();
  for (const Pose& p : source_poses) p.validate();
  if (!(max_distance > 0) || !std::isfinite(max_distance)) {
    throw Error(ErrorCode::kConfig, "max_distance must be positive finite");
  }
  if (!(background >= 0.0 && background <= 1.0)) {
    throw Error(ErrorCode::kConfig, "background must lie in [0, 1]");
  }
  if (ground_label < 0) {
    throw Error(ErrorCode::kConfig, "ground label must be non-negative");
  }
  if (lambda_star.base <= 0) {
    throw Error(ErrorCode::kConfig, "lambda base must be positive");
  }
  if (lambda_star.kind == LambdaSpec::Kind::kSinusoidal &&
      !(lambda_star.amplitude >= 0 && lambda_star.amplitude < 1)) {
    throw Error(ErrorCode::kConfig, "lambda amplitude must lie in [0, 1)");
  }

  // Anti-aliasing bound: the highest texture harmonic, projected at the
  // farthest distance a surface can be seen from any camera in the rig, must
  // stay under half a cycle per pixel.
  const double min_focal = std::min(intrinsics.fx, intrinsics.fy);
  std::vector<Pose> cameras = source_poses;
  cameras.push_back(target_pose);
  auto check_surface = [&](const TextureSpec& tex, double far_dist,
                           const char* what) {
    const double cycles_per_px = pattern_harmonic(tex) * far_dist / min_focal;
    if (!(tex.frequency > 0) || cycles_per_px > 0.5) {
      throw Error(ErrorCode::kConfig,
                  std::string(what) + " texture would alias at the rendered "
                                      "resolution; lower its frequency");
    }
  };
  check_surface(ground_texture, max_distance, "ground");
  for (const SceneBox& box : boxes) {
    if (box.label < 0) {
      throw Error(ErrorCode::kConfig, "box label must be non-negative");
    }
    if (!(box.half_extents.minCoeff() > 0)) {
      throw Error(ErrorCode::kConfig, "box half extents must be positive");
    }
    double far_dist = 0.0;
    for (const Pose& cam : cameras) {
      // Farthest corner from this camera bounds the box's viewing distance.
      for (int corner = 0; corner < 8; ++corner) {
        Eigen::Vector3d c = box.center;
        for (int a = 0; a < 3; ++a) {
          c[a] += ((corner >> a) & 1) ? box.half_extents[a]
                                      : -box.half_extents[a];
        }
        // Moving boxes sweep along their motion; cover the swept extent for
        // as many steps as there are source views.
        const double sweep =
            box.moving ? source_poses.size() * box.motion.norm() : 0.0;
        far_dist =
            std::max(far_dist, (c - cam.translation).norm() + sweep);
      }
    }
    check_surface(box.texture, std::min(far_dist, max_distance), "box");
  }
}

Pose look_pose(const Eigen::Vector3d& position, double yaw_deg,
               double pitch_deg) {
  const double yaw = yaw_deg * kPi / 180.0;
  const double pitch = pitch_deg * kPi / 180.0;
  const Eigen::Vector3d forward(std::cos(pitch) * std::cos(yaw),
                                std::cos(pitch) * std::sin(yaw),
                                -std::sin(pitch));
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  const double right_norm = right.norm();
  if (right_norm < 1e-9) {
    throw Error(ErrorCode::kDomain,
                "camera pitch too close to vertical to fix the horizon");
  }
  right /= right_norm;
  const Eigen::Vector3d down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = position;
  return pose;
}

RenderResult render(const SceneSpec& spec, const Pose& pose,
                    int displacement_steps) {
  spec.validate();
  pose.validate();
  const int h = spec.intrinsics.height;
  const int w = spec.intrinsics.width;

  RenderResult out;
  out.image = Image(h, w, 3, spec.background);
  out.depth = MetricDepthMap(h, w, 0.0);
  out.hit = ValidityMask(h, w, false);
  out.semantics = SemanticMap(h, w, spec.num_classes(), kVoidLabel);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const PixelCoord p{static_cast<double>(u), static_cast<double>(v)};
      const Ray ray = pixel_ray(p, spec.intrinsics, pose);

      double best_t = std::numeric_limits<double>::infinity();
      int best_label = kVoidLabel;
      SurfaceShading best_surface{};

      if (std::abs(ray.direction.z()) > 1e-15) {
        const double t =
            (spec.ground_height - ray.origin.z()) / ray.direction.z();
        if (t > kRayEps && t < best_t) {
          best_t = t;
          best_label = spec.ground_label;
          best_surface = {spec.ground_texture, 0};
        }
      }
      for (size_t b = 0; b < spec.boxes.size(); ++b) {
        const SceneBox& box = spec.boxes[b];
        const Eigen::Vector3d center = box_center_at(box, displacement_steps);
        const auto t = intersect_box(ray, center - box.half_extents,
                                     center + box.half_extents);
        if (t && *t < best_t) {
          best_t = *t;
          best_label = box.label;
          best_surface = {box.texture, b + 1};
        }
      }
      if (!std::isfinite(best_t) || best_t > spec.max_distance) continue;

      const Eigen::Vector3d point = ray.point_at(best_t);
      // best_t is distance along the unit ray; camera-frame depth divides
      // out the length of the unnormalized pixel direction (z = 1).
      const Eigen::Vector3d dir_cam((u - spec.intrinsics.cx) / spec.intrinsics.fx,
                                    (v - spec.intrinsics.cy) / spec.intrinsics.fy,
                                    1.0);
      out.depth.at(v, u) = best_t / dir_cam.norm();
      out.hit.set(v, u, true);
      out.semantics.at(v, u) = best_label;
      for (int c = 0; c < 3; ++c) {
        out.image.at(v, u, c) = shade(spec, best_surface, point, c);
      }
    }
  }
  return out;
}

std::vector<double> lambda_star_field(const LambdaSpec& spec, int height,
                                      int width) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::kDimension, "field dims must be positive");
  }
  std::vector<double> field(static_cast<size_t>(height) * width, spec.base);
  if (spec.kind == LambdaSpec::Kind::kConstant) return field;
  const double du = (width > 1) ? 1.0 / (width - 1) : 0.0;
  const double dv = (height > 1) ? 1.0 / (height - 1) : 0.0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const double arg = 2.0 * kPi * (spec.cycles_u * u * du +
                                      spec.cycles_v * v * dv) +
                         spec.phase;
      field[static_cast<size_t>(v) * width + u] =
          spec.base * (1.0 + spec.amplitude * std::sin(arg));
    }
  }
  return field;
}

RelativeDepthMap corrupt_to_relative(const MetricDepthMap& depth,
                                     const ValidityMask& valid,
                                     const std::vector<double>& lambda,
                                     double gamma) {
  const size_t n = depth.data.size();
  if (valid.data.size() != n || lambda.size() != n) {
    throw Error(ErrorCode::kDimension, "corruption input size mismatch");
  }
  RelativeDepthMap rel(depth.height, depth.width, 0.0);
  for (size_t i = 0; i < n; ++i) {
    if (!valid.data[i]) continue;
    if (!(lambda[i] > 0)) {
      throw Error(ErrorCode::kDomain, "lambda field must be positive");
    }
    const double r = (depth.data[i] - gamma) / lambda[i];
    if (!(r > 0)) {
      throw Error(ErrorCode::kDomain,
                  "corruption produced non-positive relative depth");
    }
    rel.data[i] = r;
  }
  return rel;
}

BundleTruth make_bundle(const SceneSpec& spec) {
  spec.validate();
  if (spec.source_poses.empty()) {
    throw Error(ErrorCode::kConfig, "scene needs at least one source view");
  }
  RenderResult target = render(spec, spec.target_pose, 0);

  BundleTruth out;
  out.gamma_star = spec.gamma_star;
  out.lambda_star = lambda_star_field(spec.lambda_star,
                                      spec.intrinsics.height,
                                      spec.intrinsics.width);
  out.bundle.target = target.image;
  out.bundle.intrinsics = spec.intrinsics;
  out.bundle.target_pose = spec.target_pose;
  for (size_t i = 0; i < spec.source_poses.size(); ++i) {
    RenderResult src =
        render(spec, spec.source_poses[i], static_cast<int>(i) + 1);
    out.bundle.sources.push_back(
        SourceView{std::move(src.image), spec.source_poses[i]});
  }
  out.bundle.rel_depth = corrupt_to_relative(target.depth, target.hit,
                                             out.lambda_star, spec.gamma_star);
  // Usable for the loss: hit by a ray and not an object that moves between
  // views. Such pixels still carry depth and labels for fusion.
  ValidityMask static_mask =
      moving_object_mask(target.semantics, spec.moving_classes);
  for (size_t i = 0; i < static_mask.data.size(); ++i) {
    if (!target.hit.data[i]) static_mask.data[i] = 0;
  }
  out.bundle.static_mask = std::move(static_mask);
  out.gt_depth = std::move(target.depth);
  out.gt_valid = std::move(target.hit);
  out.gt_semantics = std::move(target.semantics);
  return out;
}

SceneSpec make_default_scene(uint64_t seed) {
  SceneSpec spec;
  spec.intrinsics.fx = 160.0;
  spec.intrinsics.fy = 160.0;
  spec.intrinsics.width = 192;
  spec.intrinsics.height = 128;
  spec.intrinsics.cx = (spec.intrinsics.width - 1) / 2.0;
  spec.intrinsics.cy = (spec.intrinsics.height - 1) / 2.0;
  spec.target_pose = look_pose({0.0, 0.0, 1.5}, 0.0, 30.0);
  spec.source_poses = {look_pose({0.0, 0.3, 1.5}, 0.0, 30.0),
                       look_pose({0.0, -0.6, 1.5}, 0.0, 30.0)};
  spec.ground_height = 0.0;
  spec.ground_label = 0;
  spec.ground_texture = TextureSpec{0, 0.2};
  spec.max_distance = 60.0;
  spec.seed = seed;
  spec.lambda_star = LambdaSpec{LambdaSpec::Kind::kConstant, 12.0, 0.0,
                                1.0, 0.0, 0.0};
  return spec;
}

}  // namespace primivox
