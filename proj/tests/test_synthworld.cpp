#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "primivox/error.hpp"
#include "primivox/imgproc.hpp"
#include "primivox/synthworld.hpp"

using namespace primivox;

namespace {

// Small identity-pose rig staring straight at a fronto-parallel wall of
// ground plane: camera +z is world +z, so a plane z = h is hit everywhere
// at depth exactly h.
SceneSpec frontal_scene() {
  SceneSpec spec;
  spec.intrinsics.fx = 40.0;
  spec.intrinsics.fy = 40.0;
  spec.intrinsics.cx = 23.5;
  spec.intrinsics.cy = 15.5;
  spec.intrinsics.width = 48;
  spec.intrinsics.height = 32;
  spec.target_pose.rotation = Eigen::Matrix3d::Identity();
  spec.target_pose.translation = Eigen::Vector3d::Zero();
  spec.source_poses = {spec.target_pose};
  spec.ground_height = 10.0;
  spec.ground_label = 0;
  spec.ground_texture = {0, 0.1};
  spec.max_distance = 20.0;
  spec.seed = 7;
  return spec;
}

}  // namespace

TEST_CASE("a fronto-parallel plane renders at exactly its distance") {
  const SceneSpec spec = frontal_scene();
  const RenderResult r = render(spec, spec.target_pose);
  for (int v = 0; v < spec.intrinsics.height; ++v) {
    for (int u = 0; u < spec.intrinsics.width; ++u) {
      REQUIRE(r.hit.at(v, u));
      CHECK(std::abs(r.depth.at(v, u) - 10.0) <= 1e-9);
      CHECK(r.semantics.at(v, u) == 0);
      for (int c = 0; c < 3; ++c) {
        CHECK(r.image.at(v, u, c) >= 0.0);
        CHECK(r.image.at(v, u, c) <= 1.0);
      }
    }
  }
}

TEST_CASE("rendering is deterministic and seed-sensitive") {
  const SceneSpec spec = frontal_scene();
  const RenderResult a = render(spec, spec.target_pose);
  const RenderResult b = render(spec, spec.target_pose);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth.data == b.depth.data);

  SceneSpec other = spec;
  other.seed = 8;
  const RenderResult c = render(other, other.target_pose);
  CHECK(a.image.data != c.image.data);
}

TEST_CASE("rays that miss everything are sky") {
  SceneSpec spec = frontal_scene();
  // Pitch the camera up a little: upper rays clear the plane, lower rays
  // still strike it within range.
  spec.target_pose = look_pose({0.0, 0.0, 1.5}, 0.0, -10.0);
  spec.source_poses = {spec.target_pose};
  spec.ground_height = 0.0;  // plane below the camera
  const RenderResult r = render(spec, spec.target_pose);
  int sky = 0, ground = 0;
  for (int v = 0; v < spec.intrinsics.height; ++v) {
    for (int u = 0; u < spec.intrinsics.width; ++u) {
      if (r.hit.at(v, u)) {
        ++ground;
        CHECK(r.depth.at(v, u) > 0.0);
      } else {
        ++sky;
        CHECK(r.depth.at(v, u) == 0.0);
        CHECK(r.semantics.at(v, u) == kVoidLabel);
        for (int c = 0; c < 3; ++c) {
          CHECK(r.image.at(v, u, c) == spec.background);
        }
      }
    }
  }
  CHECK(sky > 0);
  CHECK(ground > 0);
}

TEST_CASE("a box in front of the plane wins the depth race") {
  SceneSpec spec = frontal_scene();
  SceneBox box;
  box.center = Eigen::Vector3d(0.0, 0.0, 5.0);
  box.half_extents = Eigen::Vector3d(0.8, 0.8, 0.5);
  box.label = 1;
  spec.boxes = {box};
  const RenderResult r = render(spec, spec.target_pose);
  // The principal ray pierces the box front face at z = 4.5.
  const int cu = 23, cv = 15;
  CHECK(r.semantics.at(cv, cu) == 1);
  CHECK(std::abs(r.depth.at(cv, cu) - 4.5) <= 1e-6);
  // A corner ray misses the small box and sees the plane.
  CHECK(r.semantics.at(0, 0) == 0);
  CHECK(std::abs(r.depth.at(0, 0) - 10.0) <= 1e-9);
}

TEST_CASE("scene validation rejects aliasing textures") {
  SceneSpec spec = frontal_scene();
  spec.ground_texture.frequency = 5.0;  // way past Nyquist at 20 m
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.ground_texture.frequency = 0.1;
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("look poses are valid rotations with the requested heading") {
  const Pose level = look_pose({1.0, 2.0, 3.0}, 0.0, 0.0);
  CHECK_NOTHROW(level.validate());
  // Forward (camera +z, third column) points along world +x.
  CHECK(std::abs(level.rotation(0, 2) - 1.0) <= 1e-12);
  CHECK(std::abs(level.rotation(2, 2)) <= 1e-12);

  const Pose pitched = look_pose({0.0, 0.0, 1.5}, 90.0, 30.0);
  CHECK_NOTHROW(pitched.validate());
  // Forward tilts downward by 30 degrees.
  CHECK(std::abs(pitched.rotation(2, 2) + std::sin(M_PI / 6.0)) <= 1e-12);
  // Heading 90: horizontal component points along world +y.
  CHECK(std::abs(pitched.rotation(1, 2) - std::cos(M_PI / 6.0)) <= 1e-12);

  CHECK_THROWS_AS(look_pose({0, 0, 1}, 0.0, 90.0), Error);
}

TEST_CASE("the scale field is constant or sinusoidal as specified") {
  LambdaSpec flat;
  flat.base = 12.0;
  const std::vector<double> f = lambda_star_field(flat, 4, 6);
  REQUIRE(f.size() == 24);
  for (double x : f) CHECK(x == 12.0);

  LambdaSpec wavy;
  wavy.kind = LambdaSpec::Kind::kSinusoidal;
  wavy.base = 10.0;
  wavy.amplitude = 0.2;
  wavy.cycles_u = 1.0;
  wavy.cycles_v = 0.5;
  const std::vector<double> g = lambda_star_field(wavy, 8, 8);
  double lo = 1e300, hi = -1e300;
  for (double x : g) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    CHECK(x >= 10.0 * 0.8 - 1e-12);
    CHECK(x <= 10.0 * 1.2 + 1e-12);
  }
  CHECK(hi - lo > 1.0);  // actually varies
}

TEST_CASE("depth corruption inverts the affine model exactly") {
  const SceneSpec spec = frontal_scene();
  const RenderResult r = render(spec, spec.target_pose);
  LambdaSpec ls;
  ls.kind = LambdaSpec::Kind::kSinusoidal;
  ls.base = 3.0;
  ls.amplitude = 0.1;
  const std::vector<double> lambda =
      lambda_star_field(ls, r.depth.height, r.depth.width);
  const double gamma = 0.4;
  const RelativeDepthMap rel =
      corrupt_to_relative(r.depth, r.hit, lambda, gamma);
  for (int v = 0; v < r.depth.height; ++v) {
    for (int u = 0; u < r.depth.width; ++u) {
      const size_t i = size_t(v) * r.depth.width + u;
      CHECK(rel.at(v, u) > 0.0);
      const double rebuilt = lambda[i] * rel.at(v, u) + gamma;
      CHECK(std::abs(rebuilt - r.depth.at(v, u)) <= 1e-12);
    }
  }
}

TEST_CASE("depth corruption refuses non-positive relative depth") {
  const SceneSpec spec = frontal_scene();
  const RenderResult r = render(spec, spec.target_pose);
  const std::vector<double> lambda(size_t(r.depth.height) * r.depth.width,
                                   2.0);
  // gamma larger than every depth would make rel negative.
  try {
    corrupt_to_relative(r.depth, r.hit, lambda, 50.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomain);
  }
}

TEST_CASE("warping the target into a source view reproduces it closely") {
  const SceneSpec spec = make_default_scene(123);
  const BundleTruth truth = make_bundle(spec);
  const FrameBundle& bundle = truth.bundle;

  for (size_t s = 0; s < bundle.sources.size(); ++s) {
    const SynthesisResult synth = synthesize_view(
        bundle, truth.gt_depth, truth.gt_valid, int(s));
    REQUIRE(synth.valid.count() > 0);
    const double err =
        photometric_loss(bundle.target, synth.image, synth.valid);
    CHECK(err <= 1e-3);
    // Most of the frame warps in bounds for this rig.
    CHECK(synth.valid.count() >
          bundle.target.height * bundle.target.width / 2);
  }
}

TEST_CASE("ground-truth depth is a strict photometric optimum") {
  const SceneSpec spec = make_default_scene(321);
  const BundleTruth truth = make_bundle(spec);
  const FrameBundle& bundle = truth.bundle;

  auto loss_at = [&](double factor) {
    double total = 0.0;
    MetricDepthMap scaled = truth.gt_depth;
    for (double& d : scaled.data) d *= factor;
    for (size_t s = 0; s < bundle.sources.size(); ++s) {
      const SynthesisResult synth =
          synthesize_view(bundle, scaled, truth.gt_valid, int(s));
      total += photometric_loss(bundle.target, synth.image, synth.valid);
    }
    return total;
  };

  const double at_truth = loss_at(1.0);
  for (double factor : {0.5, 0.8, 1.25, 2.0}) {
    CHECK(loss_at(factor) > at_truth + 1e-3);
  }
}

TEST_CASE("bundles carry consistent ground truth") {
  SceneSpec spec = make_default_scene(9);
  const BundleTruth truth = make_bundle(spec);
  const FrameBundle& bundle = truth.bundle;
  CHECK_NOTHROW(bundle.validate());
  CHECK(bundle.sources.size() == spec.source_poses.size());
  CHECK(bundle.target.height == spec.intrinsics.height);

  // lambda* matches the spec field and rebuilding depth from the bundle's
  // relative depth reproduces the ground truth.
  const std::vector<double> expect_lambda = lambda_star_field(
      spec.lambda_star, spec.intrinsics.height, spec.intrinsics.width);
  CHECK(truth.lambda_star == expect_lambda);
  for (int v = 0; v < bundle.target.height; ++v) {
    for (int u = 0; u < bundle.target.width; ++u) {
      const size_t i = size_t(v) * bundle.target.width + u;
      if (!truth.gt_valid.at(v, u)) {
        CHECK(bundle.rel_depth.at(v, u) == 0.0);
        continue;
      }
      const double rebuilt = truth.lambda_star[i] * bundle.rel_depth.at(v, u) +
                             truth.gamma_star;
      CHECK(std::abs(rebuilt - truth.gt_depth.at(v, u)) <= 1e-10);
    }
  }
}

TEST_CASE("moving boxes shift between views and leave the static mask") {
  SceneSpec spec = make_default_scene(17);
  SceneBox box;
  box.center = Eigen::Vector3d(2.2, 0.0, 0.45);
  box.half_extents = Eigen::Vector3d(0.4, 0.4, 0.45);
  box.label = 1;
  box.moving = true;
  box.motion = Eigen::Vector3d(0.0, 0.25, 0.0);
  spec.boxes = {box};
  spec.moving_classes = {1};

  const RenderResult at0 = render(spec, spec.target_pose, 0);
  const RenderResult at2 = render(spec, spec.target_pose, 2);
  int moved = 0;
  for (int v = 0; v < spec.intrinsics.height; ++v) {
    for (int u = 0; u < spec.intrinsics.width; ++u) {
      if (at0.semantics.at(v, u) != at2.semantics.at(v, u)) ++moved;
    }
  }
  CHECK(moved > 0);

  const BundleTruth truth = make_bundle(spec);
  int box_pixels = 0;
  for (int v = 0; v < spec.intrinsics.height; ++v) {
    for (int u = 0; u < spec.intrinsics.width; ++u) {
      if (truth.gt_semantics.at(v, u) == 1) {
        ++box_pixels;
        CHECK_FALSE(truth.bundle.static_mask.at(v, u));
      } else if (truth.gt_valid.at(v, u)) {
        CHECK(truth.bundle.static_mask.at(v, u));
      }
    }
  }
  CHECK(box_pixels > 0);
}

TEST_CASE("the default scene is fully grounded and in range") {
  const SceneSpec spec = make_default_scene(1);
  CHECK_NOTHROW(spec.validate());
  const BundleTruth truth = make_bundle(spec);
  CHECK(truth.gt_valid.count() ==
        spec.intrinsics.width * spec.intrinsics.height);
  double lo = 1e300, hi = 0.0;
  for (double d : truth.gt_depth.data) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(lo > 1.0);
  CHECK(hi < spec.max_distance);
}
