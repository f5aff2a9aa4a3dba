// Python surface for the calibration + fusion core. Bulk data crosses the
// boundary as numpy arrays; bundles, frames, and configs are plain dicts so
// callers can build them without touching C++ types.
#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "primivox/calibrate.hpp"
#include "primivox/error.hpp"
#include "primivox/imgproc.hpp"
#include "primivox/metrics.hpp"
#include "primivox/pipeline.hpp"
#include "primivox/semantics.hpp"
#include "primivox/synthworld.hpp"
#include "primivox/voxelfuse.hpp"

namespace py = pybind11;
using namespace primivox;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IArray = py::array_t<int32_t, py::array::c_style | py::array::forcecast>;
using BArray = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

[[noreturn]] void bad_arg(const std::string& what) {
  throw py::value_error(what);
}

void expect_ndim(const py::array& a, int ndim, const char* name) {
  if (a.ndim() != ndim) {
    bad_arg(std::string(name) + " must have " + std::to_string(ndim) +
            " dimensions, got " + std::to_string(int(a.ndim())));
  }
}

Image image_from_array(const DArray& arr, const char* name) {
  Image img;
  if (arr.ndim() == 2) {
    img = Image(int(arr.shape(0)), int(arr.shape(1)), 1);
  } else if (arr.ndim() == 3) {
    img = Image(int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2)));
  } else {
    bad_arg(std::string(name) + " must be (H, W) or (H, W, C)");
  }
  std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
  return img;
}

ValidityMask mask_from_array(const BArray& arr, const char* name) {
  expect_ndim(arr, 2, name);
  ValidityMask mask(int(arr.shape(0)), int(arr.shape(1)), false);
  for (size_t i = 0; i < mask.data.size(); ++i) {
    mask.data[i] = arr.data()[i] ? 1 : 0;
  }
  return mask;
}

DArray array_from_field(const std::vector<double>& data,
                        const std::vector<py::ssize_t>& shape) {
  DArray out(shape);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

py::array_t<bool> array_from_mask(const ValidityMask& mask) {
  py::array_t<bool> out({py::ssize_t(mask.height), py::ssize_t(mask.width)});
  for (size_t i = 0; i < mask.data.size(); ++i) {
    out.mutable_data()[i] = mask.data[i] != 0;
  }
  return out;
}

CameraIntrinsics intrinsics_from_dict(const py::dict& d) {
  CameraIntrinsics k;
  k.fx = d["fx"].cast<double>();
  k.fy = d["fy"].cast<double>();
  k.cx = d["cx"].cast<double>();
  k.cy = d["cy"].cast<double>();
  k.width = d["width"].cast<int>();
  k.height = d["height"].cast<int>();
  return k;
}

py::dict intrinsics_to_dict(const CameraIntrinsics& k) {
  py::dict d;
  d["fx"] = k.fx;
  d["fy"] = k.fy;
  d["cx"] = k.cx;
  d["cy"] = k.cy;
  d["width"] = k.width;
  d["height"] = k.height;
  return d;
}

Pose pose_from_obj(const py::object& obj) {
  const py::tuple t = obj.cast<py::tuple>();
  if (t.size() != 2) bad_arg("a pose is a (rotation 3x3, translation 3) pair");
  const DArray r = t[0].cast<DArray>();
  const DArray tr = t[1].cast<DArray>();
  if (r.ndim() != 2 || r.shape(0) != 3 || r.shape(1) != 3 || tr.size() != 3) {
    bad_arg("a pose is a (rotation 3x3, translation 3) pair");
  }
  Pose pose;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) pose.rotation(i, j) = r.at(i, j);
    pose.translation(i) = tr.data()[i];
  }
  return pose;
}

py::tuple pose_to_obj(const Pose& pose) {
  DArray r({py::ssize_t(3), py::ssize_t(3)});
  DArray t(py::ssize_t(3));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.mutable_at(i, j) = pose.rotation(i, j);
    t.mutable_data()[i] = pose.translation(i);
  }
  return py::make_tuple(r, t);
}

FrameBundle bundle_from_dict(const py::dict& d) {
  FrameBundle b;
  b.target = image_from_array(d["target"].cast<DArray>(), "target");
  b.intrinsics = intrinsics_from_dict(d["intrinsics"].cast<py::dict>());
  b.target_pose = pose_from_obj(d["target_pose"]);
  for (const auto& item : d["sources"].cast<py::list>()) {
    const py::tuple t = item.cast<py::tuple>();
    if (t.size() != 3) bad_arg("each source is (image, rotation, translation)");
    SourceView view;
    view.image = image_from_array(t[0].cast<DArray>(), "source image");
    view.pose = pose_from_obj(py::make_tuple(t[1], t[2]));
    b.sources.push_back(std::move(view));
  }
  const DArray rel = d["rel_depth"].cast<DArray>();
  expect_ndim(rel, 2, "rel_depth");
  b.rel_depth = RelativeDepthMap(int(rel.shape(0)), int(rel.shape(1)));
  std::copy(rel.data(), rel.data() + rel.size(), b.rel_depth.data.begin());
  if (d.contains("static_mask")) {
    b.static_mask = mask_from_array(d["static_mask"].cast<BArray>(),
                                    "static_mask");
  } else {
    b.static_mask = ValidityMask(b.target.height, b.target.width, true);
  }
  return b;
}

CalibConfig calib_config_from_dict(const py::dict& d) {
  CalibConfig cfg;
  for (const auto& item : d) {
    const std::string key = py::str(item.first);
    const py::handle v = item.second;
    if (key == "scale_min") cfg.scale_min = v.cast<int>();
    else if (key == "scale_max") cfg.scale_max = v.cast<int>();
    else if (key == "iterations") cfg.iterations = v.cast<int>();
    else if (key == "learning_rate") cfg.learning_rate = v.cast<double>();
    else if (key == "weight_decay") cfg.weight_decay = v.cast<double>();
    else if (key == "beta1") cfg.beta1 = v.cast<double>();
    else if (key == "beta2") cfg.beta2 = v.cast<double>();
    else if (key == "epsilon") cfg.epsilon = v.cast<double>();
    else if (key == "w_rec") cfg.w_rec = v.cast<double>();
    else if (key == "w_ssim") cfg.w_ssim = v.cast<double>();
    else if (key == "min_depth") cfg.min_depth = v.cast<double>();
    else if (key == "mask_in_stage1") cfg.mask_in_stage1 = v.cast<bool>();
    else if (key == "ssim_form") {
      const std::string form = v.cast<std::string>();
      if (form == "negative") cfg.ssim_form = SsimForm::kNegative;
      else if (form == "one_minus_half") cfg.ssim_form = SsimForm::kOneMinusHalf;
      else bad_arg("ssim_form must be 'negative' or 'one_minus_half'");
    } else {
      bad_arg("unknown calibration option: " + key);
    }
  }
  return cfg;
}

std::vector<double> lambda_from_obj(const py::object& obj, int height,
                                    int width) {
  std::vector<double> lam(size_t(height) * width);
  if (py::isinstance<py::float_>(obj) || py::isinstance<py::int_>(obj)) {
    std::fill(lam.begin(), lam.end(), obj.cast<double>());
    return lam;
  }
  const DArray arr = obj.cast<DArray>();
  if (arr.ndim() != 2 || int(arr.shape(0)) != height ||
      int(arr.shape(1)) != width) {
    bad_arg("lambda must be a scalar or an (H, W) array");
  }
  std::copy(arr.data(), arr.data() + arr.size(), lam.begin());
  return lam;
}

VoxelGridConfig grid_config_from_dict(const py::dict& d) {
  VoxelGridConfig cfg;
  for (const auto& item : d) {
    const std::string key = py::str(item.first);
    const py::handle v = item.second;
    if (key == "origin") {
      const auto o = v.cast<std::array<double, 3>>();
      cfg.origin = Eigen::Vector3d(o[0], o[1], o[2]);
    } else if (key == "cell_size") cfg.cell_size = v.cast<double>();
    else if (key == "dims") cfg.dims = v.cast<std::array<int, 3>>();
    else if (key == "num_classes") cfg.num_classes = v.cast<int>();
    else if (key == "min_votes") cfg.min_votes = v.cast<int>();
    else if (key == "include_moving") cfg.include_moving = v.cast<bool>();
    else if (key == "moving_classes")
      cfg.moving_classes = v.cast<std::set<int>>();
    else bad_arg("unknown grid option: " + key);
  }
  return cfg;
}

VoxelGrid voxels_from_array(const IArray& arr, const char* name) {
  expect_ndim(arr, 3, name);
  VoxelGrid grid({int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2))});
  std::copy(arr.data(), arr.data() + arr.size(), grid.labels.begin());
  return grid;
}

py::dict bundle_to_dict(const FrameBundle& b) {
  py::dict d;
  d["target"] = array_from_field(
      b.target.data, {b.target.height, b.target.width, b.target.channels});
  d["intrinsics"] = intrinsics_to_dict(b.intrinsics);
  d["target_pose"] = pose_to_obj(b.target_pose);
  py::list sources;
  for (const SourceView& s : b.sources) {
    const py::tuple pose = pose_to_obj(s.pose);
    sources.append(py::make_tuple(
        array_from_field(s.image.data,
                         {s.image.height, s.image.width, s.image.channels}),
        pose[0], pose[1]));
  }
  d["sources"] = sources;
  d["rel_depth"] = array_from_field(
      b.rel_depth.data, {b.rel_depth.height, b.rel_depth.width});
  d["static_mask"] = array_from_mask(b.static_mask);
  return d;
}

}  // namespace

PYBIND11_MODULE(_primivox, m) {
  m.doc() =
      "Metric depth calibration by novel-view synthesis, semantic voxel "
      "fusion, and occupancy-grid evaluation.";
  m.attr("VOID_LABEL") = kVoidLabel;
  m.attr("FREE_LABEL") = kFreeLabel;

  py::register_exception<Error>(m, "PrimivoxError");

  // ---- geometry -----------------------------------------------------------
  m.def(
      "backproject",
      [](double u, double v, double depth, const py::dict& intrinsics) {
        const Eigen::Vector3d p =
            backproject({u, v}, depth, intrinsics_from_dict(intrinsics));
        return py::make_tuple(p.x(), p.y(), p.z());
      },
      py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("intrinsics"),
      "Lift a pixel at a given depth to a camera-frame 3D point.");

  m.def(
      "project",
      [](const std::array<double, 3>& point, const py::dict& intrinsics) {
        const Projection pr = project(Eigen::Vector3d(point[0], point[1],
                                                      point[2]),
                                      intrinsics_from_dict(intrinsics));
        py::dict d;
        d["u"] = pr.pixel.u;
        d["v"] = pr.pixel.v;
        d["depth"] = pr.depth;
        d["behind_camera"] = pr.behind_camera;
        return d;
      },
      py::arg("point"), py::arg("intrinsics"),
      "Project a camera-frame 3D point to pixel coordinates.");

  m.def(
      "warp_pixel",
      [](double u, double v, double depth, const py::dict& intrinsics,
         const py::object& target_pose, const py::object& source_pose) {
        const WarpResult w =
            warp_pixel({u, v}, depth, intrinsics_from_dict(intrinsics),
                       pose_from_obj(target_pose), pose_from_obj(source_pose));
        py::dict d;
        d["u"] = w.pixel.u;
        d["v"] = w.pixel.v;
        d["depth"] = w.depth;
        d["behind_camera"] = w.behind_camera;
        return d;
      },
      py::arg("u"), py::arg("v"), py::arg("depth"), py::arg("intrinsics"),
      py::arg("target_pose"), py::arg("source_pose"),
      "Reproject a target pixel with known depth into a source view.");

  // ---- image processing ---------------------------------------------------
  m.def(
      "bilinear_sample",
      [](const DArray& image, double u, double v) {
        const Image img = image_from_array(image, "image");
        const SampleValue s = bilinear_sample(img, {u, v});
        DArray values(py::ssize_t(img.channels));
        for (int c = 0; c < img.channels; ++c) {
          values.mutable_data()[c] = s.in_bounds ? s.value[c] : 0.0;
        }
        return py::make_tuple(values, s.in_bounds);
      },
      py::arg("image"), py::arg("u"), py::arg("v"),
      "Bilinearly interpolate an image at continuous pixel coordinates.");

  m.def(
      "photometric_loss",
      [](const DArray& a, const DArray& b, const BArray& mask) {
        return photometric_loss(image_from_array(a, "a"),
                                image_from_array(b, "b"),
                                mask_from_array(mask, "mask"));
      },
      py::arg("a"), py::arg("b"), py::arg("mask"),
      "Mean absolute difference over masked pixels.");

  m.def(
      "ssim",
      [](const DArray& a, const DArray& b, const BArray& mask) {
        return ssim(image_from_array(a, "a"), image_from_array(b, "b"),
                    mask_from_array(mask, "mask"));
      },
      py::arg("a"), py::arg("b"), py::arg("mask"),
      "Mean local structural similarity over fully-valid 3x3 windows.");

  // ---- calibration --------------------------------------------------------
  m.def(
      "apply_affine",
      [](const DArray& rel, const py::object& lam, double gamma,
         double min_depth) {
        expect_ndim(rel, 2, "rel_depth");
        RelativeDepthMap r(int(rel.shape(0)), int(rel.shape(1)));
        std::copy(rel.data(), rel.data() + rel.size(), r.data.begin());
        const AffineDepth out = apply_affine(
            r, lambda_from_obj(lam, r.height, r.width), gamma, min_depth);
        return py::make_tuple(
            array_from_field(out.depth.data, {r.height, r.width}),
            array_from_mask(out.valid));
      },
      py::arg("rel_depth"), py::arg("lam"), py::arg("gamma"),
      py::arg("min_depth") = 1e-3,
      "Apply depth = lam * rel + gamma; returns (depth, valid).");

  m.def(
      "scene_scale_search",
      [](const py::dict& bundle, const py::dict& config) {
        const ScaleSearchResult res = scene_scale_search(
            bundle_from_dict(bundle), calib_config_from_dict(config));
        py::dict d;
        d["scale_hat"] = res.scale_hat;
        d["losses"] = array_from_field(res.losses,
                                       {py::ssize_t(res.losses.size())});
        d["flat_curve"] = res.flat_curve;
        return d;
      },
      py::arg("bundle"), py::arg("config") = py::dict(),
      "Stage 1: integer sweep of the photometric loss over candidate "
      "scales.");

  m.def(
      "total_loss",
      [](const py::dict& bundle, const py::object& lam, double gamma,
         const py::dict& config) {
        const FrameBundle b = bundle_from_dict(bundle);
        CalibState state =
            CalibState::init(b.target.height, b.target.width, 1.0);
        state.lambda = lambda_from_obj(lam, b.target.height, b.target.width);
        state.gamma = gamma;
        return total_loss(b, state, calib_config_from_dict(config));
      },
      py::arg("bundle"), py::arg("lam"), py::arg("gamma"),
      py::arg("config") = py::dict(),
      "Photometric + structural objective at the given affine state.");

  m.def(
      "loss_gradient",
      [](const py::dict& bundle, const py::object& lam, double gamma,
         const py::dict& config) {
        const FrameBundle b = bundle_from_dict(bundle);
        CalibState state =
            CalibState::init(b.target.height, b.target.width, 1.0);
        state.lambda = lambda_from_obj(lam, b.target.height, b.target.width);
        state.gamma = gamma;
        const LossGradient g =
            loss_gradient(b, state, calib_config_from_dict(config));
        py::dict d;
        d["loss"] = g.loss;
        d["d_lambda"] = array_from_field(
            g.d_lambda, {b.target.height, b.target.width});
        d["d_gamma"] = g.d_gamma;
        return d;
      },
      py::arg("bundle"), py::arg("lam"), py::arg("gamma"),
      py::arg("config") = py::dict(),
      "Exact analytic gradient of the objective.");

  m.def(
      "refine",
      [](const py::dict& bundle, double scale, const py::dict& config) {
        const FrameBundle b = bundle_from_dict(bundle);
        const RefineResult res =
            refine(b, scale, calib_config_from_dict(config));
        py::dict d;
        d["lam"] = array_from_field(res.state.lambda,
                                    {b.target.height, b.target.width});
        d["gamma"] = res.state.gamma;
        d["losses"] = array_from_field(res.losses,
                                       {py::ssize_t(res.losses.size())});
        return d;
      },
      py::arg("bundle"), py::arg("scale"), py::arg("config") = py::dict(),
      "Stage 2: per-pixel scale field plus scalar offset refinement.");

  // ---- semantics ----------------------------------------------------------
  m.def(
      "assign_labels",
      [](const DArray& features, const DArray& embeddings) {
        expect_ndim(features, 3, "features");
        expect_ndim(embeddings, 2, "embeddings");
        FeatureMap f(int(features.shape(0)), int(features.shape(1)),
                     int(features.shape(2)));
        std::copy(features.data(), features.data() + features.size(),
                  f.data.begin());
        EmbeddingMatrix e(int(embeddings.shape(0)), int(embeddings.shape(1)));
        std::copy(embeddings.data(), embeddings.data() + embeddings.size(),
                  e.data.begin());
        const AssignResult res = assign_labels(f, e);
        IArray labels({py::ssize_t(f.height), py::ssize_t(f.width)});
        std::copy(res.map.labels.begin(), res.map.labels.end(),
                  labels.mutable_data());
        return py::make_tuple(labels, res.zero_norm_count);
      },
      py::arg("features"), py::arg("embeddings"),
      "Cosine-similarity arg-max against embedding rows; row 0 is VOID.");

  // ---- voxel fusion -------------------------------------------------------
  m.def(
      "fuse",
      [](const py::list& frames, const py::dict& grid) {
        std::vector<FusionFrame> fs;
        for (const auto& item : frames) {
          const py::dict fd = item.cast<py::dict>();
          FusionFrame f;
          const DArray depth = fd["depth"].cast<DArray>();
          expect_ndim(depth, 2, "depth");
          f.depth = MetricDepthMap(int(depth.shape(0)), int(depth.shape(1)));
          std::copy(depth.data(), depth.data() + depth.size(),
                    f.depth.data.begin());
          f.valid = mask_from_array(fd["valid"].cast<BArray>(), "valid");
          const IArray labels = fd["labels"].cast<IArray>();
          expect_ndim(labels, 2, "labels");
          const py::dict gd = grid;
          f.semantics = SemanticMap(int(labels.shape(0)),
                                    int(labels.shape(1)),
                                    gd["num_classes"].cast<int>());
          std::copy(labels.data(), labels.data() + labels.size(),
                    f.semantics.labels.begin());
          f.intrinsics = intrinsics_from_dict(fd["intrinsics"].cast<py::dict>());
          f.pose = pose_from_obj(fd["pose"]);
          fs.push_back(std::move(f));
        }
        const VoxelGridConfig cfg = grid_config_from_dict(grid);
        const FuseResult res = fuse(fs, cfg);
        IArray labels({py::ssize_t(cfg.dims[0]), py::ssize_t(cfg.dims[1]),
                       py::ssize_t(cfg.dims[2])});
        std::copy(res.grid.labels.begin(), res.grid.labels.end(),
                  labels.mutable_data());
        py::array_t<uint32_t> votes(
            {py::ssize_t(cfg.dims[0]), py::ssize_t(cfg.dims[1]),
             py::ssize_t(cfg.dims[2]), py::ssize_t(cfg.num_classes)});
        std::copy(res.votes.votes.begin(), res.votes.votes.end(),
                  votes.mutable_data());
        return py::make_tuple(labels, votes);
      },
      py::arg("frames"), py::arg("grid"),
      "Vote-based semantic fusion; returns (labels XYZ, votes XYZK).");

  // ---- evaluation ---------------------------------------------------------
  m.def(
      "evaluate_grids",
      [](const IArray& pred, const IArray& truth, int num_classes,
         const std::set<int>& ignore) {
        const VoxelGrid p = voxels_from_array(pred, "pred");
        const VoxelGrid t = voxels_from_array(truth, "truth");
        const ConfusionMatrix cm = confusion(p, t, num_classes, ignore);
        const IouReport iou = per_class_iou(cm);
        const OccupancyReport occ = occupancy_metrics(p, t);
        py::dict d;
        d["mean_iou"] = iou.mean_iou;
        d["iou"] = array_from_field(iou.iou, {py::ssize_t(iou.iou.size())});
        py::list included;
        for (const bool inc : iou.included) included.append(inc);
        d["included"] = included;
        d["occupancy_iou"] = occ.iou;
        d["occupancy_precision"] = occ.precision;
        d["occupancy_recall"] = occ.recall;
        py::array_t<uint64_t> counts(
            {py::ssize_t(num_classes + 1), py::ssize_t(num_classes + 1)});
        std::copy(cm.counts.begin(), cm.counts.end(), counts.mutable_data());
        d["confusion"] = counts;
        return d;
      },
      py::arg("pred"), py::arg("truth"), py::arg("num_classes"),
      py::arg("ignore") = std::set<int>(),
      "Per-class IoU, occupancy metrics, and the confusion matrix.");

  // ---- synthetic world ----------------------------------------------------
  m.def(
      "make_default_bundle",
      [](uint64_t seed) {
        SceneSpec spec = make_default_scene(seed);
        const BundleTruth truth = make_bundle(spec);
        py::dict d;
        d["bundle"] = bundle_to_dict(truth.bundle);
        d["gt_depth"] = array_from_field(
            truth.gt_depth.data, {truth.gt_depth.height, truth.gt_depth.width});
        d["gt_valid"] = array_from_mask(truth.gt_valid);
        d["lambda_star"] = array_from_field(
            truth.lambda_star,
            {truth.gt_depth.height, truth.gt_depth.width});
        d["gamma_star"] = truth.gamma_star;
        return d;
      },
      py::arg("seed") = 1234,
      "Render the built-in synthetic scene and bundle it for calibration.");

  // ---- batch pipeline -----------------------------------------------------
  m.def(
      "run_synth",
      [](const std::string& config, const std::string& out, int workers,
         std::optional<uint64_t> seed) {
        run_synth(config, out, workers, seed);
      },
      py::arg("config"), py::arg("out"), py::arg("workers") = 1,
      py::arg("seed") = py::none(),
      "Render a scene config into frames/, gt/, and a manifest.");

  m.def(
      "run_calibrate",
      [](const std::string& config, const std::string& manifest,
         const std::string& out, int workers) {
        run_calibrate(config, manifest, out, workers);
      },
      py::arg("config"), py::arg("manifest"), py::arg("out"),
      py::arg("workers") = 1,
      "Calibrate every manifest frame and write metric depth maps.");

  m.def(
      "run_fuse",
      [](const std::string& config, const std::string& manifest,
         const std::string& depth_dir, const std::string& out) {
        run_fuse(config, manifest, depth_dir, out);
      },
      py::arg("config"), py::arg("manifest"), py::arg("depth_dir"),
      py::arg("out"), "Fuse calibrated frames into a labeled voxel grid.");

  m.def(
      "run_eval",
      [](const std::string& pred, const std::string& truth,
         const std::string& out, const std::set<int>& ignore) {
        run_eval(pred, truth, out, ignore);
      },
      py::arg("pred"), py::arg("truth"), py::arg("out"),
      py::arg("ignore") = std::set<int>(),
      "Compare two voxel grid files and write a metric report.");
}
