#include "primivox/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

namespace primivox {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat,
                std::string("malformed ") + what + " config: " + e.what());
  }
}

Eigen::Vector3d vec3_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kFormat,
                std::string(what) + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

TextureSpec texture_from_json(const json& j) {
  TextureSpec tex;
  tex.pattern = j.value("pattern", 0);
  tex.frequency = j.value("frequency", 0.2);
  return tex;
}

// Runs fn(0..count-1) on a small thread pool; any worker exception aborts the
// run and is rethrown on the caller thread.
void parallel_for_indices(size_t count, int workers,
                          const std::function<void(size_t)>& fn) {
  if (workers < 1) {
    throw Error(ErrorCode::kConfig, "workers must be at least 1");
  }
  if (workers == 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto body = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int n = std::min<size_t>(workers, count);
  threads.reserve(n);
  for (int t = 0; t < n; ++t) threads.emplace_back(body);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory: " + dir);
}

std::string join(const std::string& dir, const std::string& leaf) {
  return (fs::path(dir) / leaf).string();
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

SceneSpec SceneConfig::build_target(size_t target_index) const {
  if (target_index >= targets.size()) {
    throw Error(ErrorCode::kRange, "target index out of range");
  }
  SceneSpec spec = proto;
  spec.target_pose = targets[target_index];
  spec.source_poses.clear();
  for (const Eigen::Vector3d& offset : source_offsets) {
    Pose src = targets[target_index];
    src.translation += offset;
    spec.source_poses.push_back(src);
  }
  return spec;
}

SceneConfig scene_config_from_json(const std::string& json_text) {
  const json doc = parse_json(json_text, "scene");
  SceneConfig cfg;
  try {
    const json& img = doc.at("image");
    cfg.proto.intrinsics.width = img.at("width").get<int>();
    cfg.proto.intrinsics.height = img.at("height").get<int>();
    cfg.proto.intrinsics.fx = img.at("fx").get<double>();
    cfg.proto.intrinsics.fy = img.at("fy").get<double>();
    cfg.proto.intrinsics.cx =
        img.value("cx", (cfg.proto.intrinsics.width - 1) / 2.0);
    cfg.proto.intrinsics.cy =
        img.value("cy", (cfg.proto.intrinsics.height - 1) / 2.0);

    for (const json& cam : doc.at("targets")) {
      cfg.targets.push_back(look_pose(
          vec3_from_json(cam.at("position"), "target position"),
          cam.value("yaw_deg", 0.0), cam.value("pitch_deg", 0.0)));
    }
    for (const json& off : doc.at("source_offsets")) {
      cfg.source_offsets.push_back(vec3_from_json(off, "source offset"));
    }

    const json& ground = doc.at("ground");
    cfg.proto.ground_height = ground.value("height", 0.0);
    cfg.proto.ground_label = ground.value("label", 0);
    if (ground.contains("texture")) {
      cfg.proto.ground_texture = texture_from_json(ground["texture"]);
    }
    if (doc.contains("boxes")) {
      for (const json& b : doc["boxes"]) {
        SceneBox box;
        box.center = vec3_from_json(b.at("center"), "box center");
        box.half_extents =
            vec3_from_json(b.at("half_extents"), "box half_extents");
        box.label = b.at("label").get<int>();
        if (b.contains("texture")) box.texture = texture_from_json(b["texture"]);
        box.moving = b.value("moving", false);
        if (b.contains("motion")) {
          box.motion = vec3_from_json(b["motion"], "box motion");
        }
        cfg.proto.boxes.push_back(std::move(box));
      }
    }

    cfg.proto.max_distance = doc.value("max_distance", 60.0);
    cfg.proto.background = doc.value("background", 0.5);
    cfg.proto.seed = doc.value("seed", uint64_t{0});

    if (doc.contains("lambda_star")) {
      const json& l = doc["lambda_star"];
      const std::string kind = l.value("kind", "constant");
      if (kind == "constant") {
        cfg.proto.lambda_star.kind = LambdaSpec::Kind::kConstant;
      } else if (kind == "sinusoidal") {
        cfg.proto.lambda_star.kind = LambdaSpec::Kind::kSinusoidal;
      } else {
        throw Error(ErrorCode::kFormat, "unknown lambda kind: " + kind);
      }
      cfg.proto.lambda_star.base = l.value("base", 1.0);
      cfg.proto.lambda_star.amplitude = l.value("amplitude", 0.0);
      cfg.proto.lambda_star.cycles_u = l.value("cycles_u", 1.0);
      cfg.proto.lambda_star.cycles_v = l.value("cycles_v", 0.0);
      cfg.proto.lambda_star.phase = l.value("phase", 0.0);
    }
    cfg.proto.gamma_star = doc.value("gamma_star", 0.0);
    if (doc.contains("moving_classes")) {
      for (const json& c : doc["moving_classes"]) {
        cfg.proto.moving_classes.insert(c.get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat,
                std::string("bad scene config: ") + e.what());
  }
  if (cfg.targets.empty()) {
    throw Error(ErrorCode::kConfig, "scene config needs at least one target");
  }
  if (cfg.source_offsets.empty()) {
    throw Error(ErrorCode::kConfig,
                "scene config needs at least one source offset");
  }
  return cfg;
}

CalibPipelineConfig calib_config_from_json(const std::string& json_text) {
  const json doc = parse_json(json_text, "calibration");
  CalibPipelineConfig cfg;
  try {
    cfg.calib.scale_min = doc.value("scale_min", cfg.calib.scale_min);
    cfg.calib.scale_max = doc.value("scale_max", cfg.calib.scale_max);
    cfg.calib.iterations = doc.value("iterations", cfg.calib.iterations);
    cfg.calib.learning_rate =
        doc.value("learning_rate", cfg.calib.learning_rate);
    cfg.calib.weight_decay = doc.value("weight_decay", cfg.calib.weight_decay);
    cfg.calib.beta1 = doc.value("beta1", cfg.calib.beta1);
    cfg.calib.beta2 = doc.value("beta2", cfg.calib.beta2);
    cfg.calib.epsilon = doc.value("epsilon", cfg.calib.epsilon);
    cfg.calib.w_rec = doc.value("w_rec", cfg.calib.w_rec);
    cfg.calib.w_ssim = doc.value("w_ssim", cfg.calib.w_ssim);
    cfg.calib.min_depth = doc.value("min_depth", cfg.calib.min_depth);
    cfg.calib.mask_in_stage1 =
        doc.value("mask_in_stage1", cfg.calib.mask_in_stage1);
    const std::string form = doc.value("ssim_form", "negative");
    if (form == "negative") {
      cfg.calib.ssim_form = SsimForm::kNegative;
    } else if (form == "one_minus_half") {
      cfg.calib.ssim_form = SsimForm::kOneMinusHalf;
    } else {
      throw Error(ErrorCode::kFormat, "unknown ssim_form: " + form);
    }
    if (doc.contains("moving_classes")) {
      for (const json& c : doc["moving_classes"]) {
        cfg.moving_classes.insert(c.get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat,
                std::string("bad calibration config: ") + e.what());
  }
  cfg.calib.validate();
  return cfg;
}

VoxelGridConfig grid_config_from_json(const std::string& json_text) {
  const json doc = parse_json(json_text, "grid");
  VoxelGridConfig cfg;
  try {
    cfg.origin = vec3_from_json(doc.at("origin"), "grid origin");
    cfg.cell_size = doc.at("cell_size").get<double>();
    const json& dims = doc.at("dims");
    if (!dims.is_array() || dims.size() != 3) {
      throw Error(ErrorCode::kFormat, "grid dims must have 3 entries");
    }
    cfg.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
    cfg.num_classes = doc.at("num_classes").get<int>();
    cfg.min_votes = doc.value("min_votes", 1);
    const std::string tie = doc.value("tie_break", "lowest");
    if (tie != "lowest") {
      throw Error(ErrorCode::kFormat, "unknown tie_break: " + tie);
    }
    cfg.include_moving = doc.value("include_moving", true);
    if (doc.contains("moving_classes")) {
      for (const json& c : doc["moving_classes"]) {
        cfg.moving_classes.insert(c.get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat,
                std::string("bad grid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

void run_synth(const std::string& config_path, const std::string& out_dir,
               int workers, std::optional<uint64_t> seed_override) {
  SceneConfig cfg = scene_config_from_json(read_text_file(config_path));
  if (seed_override) cfg.proto.seed = *seed_override;
  ensure_dir(join(out_dir, "frames"));
  ensure_dir(join(out_dir, "gt"));

  std::vector<std::vector<FrameEntry>> per_target(cfg.targets.size());
  parallel_for_indices(cfg.targets.size(), workers, [&](size_t i) {
    const SceneSpec spec = cfg.build_target(i);
    const BundleTruth truth = make_bundle(spec);
    const std::string name = "t" + std::to_string(i);
    const std::string frames = join(out_dir, "frames");
    const std::string gt = join(out_dir, "gt");

    FrameEntry target;
    target.name = name;
    target.image = "frames/" + name + "_image.pvt";
    target.camera = "frames/" + name + "_camera.txt";
    target.rel_depth = "frames/" + name + "_reldepth.pvt";
    target.depth_convention = DepthConvention::kDepth;
    target.semantics = "frames/" + name + "_sem.pvt";
    target.num_classes = spec.num_classes();
    target.static_mask = "frames/" + name + "_static.pvt";

    save_tensor(join(frames, name + "_image.pvt"),
                image_to_tensor(truth.bundle.target));
    save_camera(join(frames, name + "_camera.txt"),
                CameraRecord{spec.intrinsics, spec.target_pose});
    save_tensor(join(frames, name + "_reldepth.pvt"),
                rel_depth_to_tensor(truth.bundle.rel_depth));
    save_tensor(join(frames, name + "_sem.pvt"),
                semantic_to_tensor(truth.gt_semantics));
    save_tensor(join(frames, name + "_static.pvt"),
                mask_to_tensor(truth.bundle.static_mask));

    for (size_t s = 0; s < truth.bundle.sources.size(); ++s) {
      const std::string sname = name + "_s" + std::to_string(s);
      FrameEntry src;
      src.name = sname;
      src.image = "frames/" + sname + "_image.pvt";
      src.camera = "frames/" + sname + "_camera.txt";
      save_tensor(join(frames, sname + "_image.pvt"),
                  image_to_tensor(truth.bundle.sources[s].image));
      save_camera(join(frames, sname + "_camera.txt"),
                  CameraRecord{spec.intrinsics, spec.source_poses[s]});
      target.sources.push_back(sname);
      per_target[i].push_back(std::move(src));
    }
    per_target[i].insert(per_target[i].begin(), std::move(target));

    // Ground truth mirrors the calibrate output naming so the fuse stage can
    // consume either directory interchangeably.
    save_tensor(join(gt, name + "_metric.pvt"),
                depth_to_tensor(truth.gt_depth));
    save_tensor(join(gt, name + "_valid.pvt"), mask_to_tensor(truth.gt_valid));
    save_tensor(join(gt, name + "_lambda.pvt"),
                field_to_tensor(truth.lambda_star,
                                spec.intrinsics.height,
                                spec.intrinsics.width));
    save_kv(join(gt, name + "_affine.txt"),
            {{"gamma", format_double(truth.gamma_star)}});
  });

  FrameManifest manifest;
  for (const auto& entries : per_target) {
    for (const FrameEntry& e : entries) manifest.frames.push_back(e);
  }
  manifest.save(join(out_dir, "manifest.json"));
}

void run_calibrate(const std::string& config_path,
                   const std::string& manifest_path, const std::string& out_dir,
                   int workers) {
  const CalibPipelineConfig cfg =
      calib_config_from_json(read_text_file(config_path));
  const FrameManifest manifest = FrameManifest::load(manifest_path);
  ensure_dir(out_dir);

  std::vector<size_t> jobs;
  for (size_t i = 0; i < manifest.frames.size(); ++i) {
    if (manifest.frames[i].calibratable()) jobs.push_back(i);
  }

  parallel_for_indices(jobs.size(), workers, [&](size_t j) {
    const FrameEntry& entry = manifest.frames[jobs[j]];
    const FrameBundle bundle =
        load_bundle(manifest, entry, cfg.moving_classes);

    const ScaleSearchResult sweep = scene_scale_search(bundle, cfg.calib);
    const RefineResult refined =
        refine(bundle, static_cast<double>(sweep.scale_hat), cfg.calib);
    const AffineDepth affine =
        apply_affine(bundle.rel_depth, refined.state, cfg.calib.min_depth);

    const std::string& name = entry.name;
    save_tensor(join(out_dir, name + "_metric.pvt"),
                depth_to_tensor(affine.depth));
    save_tensor(join(out_dir, name + "_valid.pvt"),
                mask_to_tensor(affine.valid));
    save_tensor(join(out_dir, name + "_lambda.pvt"),
                field_to_tensor(refined.state.lambda, bundle.target.height,
                                bundle.target.width));
    save_tensor(join(out_dir, name + "_scale_curve.pvt"),
                curve_to_tensor(sweep.losses));
    save_tensor(join(out_dir, name + "_trace.pvt"),
                curve_to_tensor(refined.losses));
    save_kv(join(out_dir, name + "_calib.txt"),
            {{"scale_hat", std::to_string(sweep.scale_hat)},
             {"flat_curve", sweep.flat_curve ? "1" : "0"},
             {"gamma", format_double(refined.state.gamma)},
             {"iterations", std::to_string(cfg.calib.iterations)},
             {"final_loss",
              format_double(refined.losses.empty() ? 0.0
                                                   : refined.losses.back())}});
  });

  std::string summary =
      "frames_processed: " + std::to_string(jobs.size()) + "\n";
  for (size_t j : jobs) summary += "frame: " + manifest.frames[j].name + "\n";
  write_text_atomic(join(out_dir, "calibrate_summary.txt"), summary);
}

void run_fuse(const std::string& config_path, const std::string& manifest_path,
              const std::string& depth_dir, const std::string& out_dir) {
  const VoxelGridConfig cfg = grid_config_from_json(read_text_file(config_path));
  const FrameManifest manifest = FrameManifest::load(manifest_path);
  ensure_dir(out_dir);

  std::vector<FusionFrame> frames;
  std::vector<std::string> fused_names;
  for (const FrameEntry& entry : manifest.frames) {
    if (entry.semantics.empty()) continue;
    const std::string depth_path = join(depth_dir, entry.name + "_metric.pvt");
    const std::string valid_path = join(depth_dir, entry.name + "_valid.pvt");
    if (!fs::exists(depth_path)) continue;
    if (entry.num_classes != cfg.num_classes) {
      throw Error(ErrorCode::kDimension,
                  "frame " + entry.name + " has " +
                      std::to_string(entry.num_classes) +
                      " classes but the grid expects " +
                      std::to_string(cfg.num_classes));
    }
    FusionFrame frame;
    frame.depth = depth_from_tensor(load_tensor(depth_path));
    frame.valid = mask_from_tensor(load_tensor(valid_path));
    frame.semantics = semantic_from_tensor(
        load_tensor(manifest.resolve(entry.semantics)), entry.num_classes);
    const CameraRecord cam = load_camera(manifest.resolve(entry.camera));
    frame.intrinsics = cam.intrinsics;
    frame.pose = cam.pose;
    frames.push_back(std::move(frame));
    fused_names.push_back(entry.name);
  }

  const FuseResult result = fuse(frames, cfg);
  save_tensor(join(out_dir, "voxels.pvt"), voxel_to_tensor(result.grid));
  save_tensor(join(out_dir, "votes.pvt"), votes_to_tensor(result.votes));

  json meta;
  meta["origin"] = {cfg.origin.x(), cfg.origin.y(), cfg.origin.z()};
  meta["cell_size"] = cfg.cell_size;
  meta["dims"] = {cfg.dims[0], cfg.dims[1], cfg.dims[2]};
  meta["num_classes"] = cfg.num_classes;
  meta["min_votes"] = cfg.min_votes;
  meta["include_moving"] = cfg.include_moving;
  meta["moving_classes"] = json::array();
  for (int c : cfg.moving_classes) meta["moving_classes"].push_back(c);
  meta["frames"] = fused_names;
  write_text_atomic(join(out_dir, "voxels_meta.json"), meta.dump(2) + "\n");

  std::string points = "# x y z label\n";
  for (const LabeledPoint& p : grid_to_points(result.grid, cfg)) {
    points += format_double(p.position.x()) + " " +
              format_double(p.position.y()) + " " +
              format_double(p.position.z()) + " " + std::to_string(p.label) +
              "\n";
  }
  write_text_atomic(join(out_dir, "points.txt"), points);
}

namespace {

int meta_num_classes(const std::string& grid_path) {
  const std::string meta_path =
      (fs::path(grid_path).parent_path() / "voxels_meta.json").string();
  const json meta = parse_json(read_text_file(meta_path), "grid meta");
  if (!meta.contains("num_classes")) {
    throw Error(ErrorCode::kFormat, "grid meta missing num_classes");
  }
  return meta["num_classes"].get<int>();
}

}  // namespace

void run_eval(const std::string& pred_path, const std::string& truth_path,
              const std::string& out_dir, const std::set<int>& ignore) {
  const VoxelGrid pred = voxel_from_tensor(load_tensor(pred_path));
  const VoxelGrid truth = voxel_from_tensor(load_tensor(truth_path));
  const int pred_k = meta_num_classes(pred_path);
  const int truth_k = meta_num_classes(truth_path);
  if (pred_k != truth_k) {
    throw Error(ErrorCode::kDimension,
                "grids disagree on num_classes: " + std::to_string(pred_k) +
                    " vs " + std::to_string(truth_k));
  }

  const ConfusionMatrix cm = confusion(pred, truth, pred_k, ignore);
  const IouReport iou = per_class_iou(cm);
  const OccupancyReport occ = occupancy_metrics(pred, truth);

  std::ostringstream report;
  report << "num_classes: " << pred_k << "\n";
  report << "voxels: " << truth.labels.size() << "\n";
  report << "mean_iou: " << format_double(iou.mean_iou) << "\n";
  for (int c = 0; c < pred_k; ++c) {
    report << "iou_class_" << c << ": "
           << (iou.included[c] ? format_double(iou.iou[c]) : "excluded")
           << "\n";
  }
  report << "occupancy_iou: " << format_double(occ.iou) << "\n";
  report << "occupancy_precision: " << format_double(occ.precision) << "\n";
  report << "occupancy_precision_defined: " << (occ.precision_defined ? 1 : 0)
         << "\n";
  report << "occupancy_recall: " << format_double(occ.recall) << "\n";
  report << "confusion:\n";
  for (int gt = 0; gt <= pred_k; ++gt) {
    for (int pr = 0; pr <= pred_k; ++pr) {
      report << (pr ? " " : "  ") << cm.at(gt, pr);
    }
    report << "\n";
  }

  ensure_dir(out_dir);
  write_text_atomic(join(out_dir, "report.txt"), report.str());
  std::cout << report.str();
}

// ---------------------------------------------------------------------------

int cli_main(int argc, char** argv) {
  CLI::App app{"metric depth calibration and semantic voxel fusion"};
  app.require_subcommand(1);

  std::string config, out, manifest_path, depth_dir, pred, truth;
  int workers = 1;
  uint64_t seed = 0;
  bool seed_set = false;
  std::vector<int> ignore;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", config, "scene config JSON")->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--workers", workers, "parallel frame workers");
  synth->add_option("--seed", seed, "override the scene seed")
      ->each([&](const std::string&) { seed_set = true; });

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "recover metric depth for every frame");
  calibrate->add_option("--config", config, "calibration config JSON")
      ->required();
  calibrate->add_option("--manifest", manifest_path, "frame manifest JSON")
      ->required();
  calibrate->add_option("--out", out, "output directory")->required();
  calibrate->add_option("--workers", workers, "parallel frame workers");

  CLI::App* fuse_cmd =
      app.add_subcommand("fuse", "fuse calibrated frames into a voxel grid");
  fuse_cmd->add_option("--config", config, "grid config JSON")->required();
  fuse_cmd->add_option("--manifest", manifest_path, "frame manifest JSON")
      ->required();
  fuse_cmd->add_option("--depth-dir", depth_dir,
                       "directory with per-frame depth files")
      ->required();
  fuse_cmd->add_option("--out", out, "output directory")->required();

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "compare a voxel grid against a reference");
  eval_cmd->add_option("--pred", pred, "predicted grid tensor")->required();
  eval_cmd->add_option("--truth", truth, "reference grid tensor")->required();
  eval_cmd->add_option("--out", out, "output directory")->required();
  eval_cmd->add_option("--ignore", ignore, "ground-truth classes to skip");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      run_synth(config, out, workers,
                seed_set ? std::optional<uint64_t>(seed) : std::nullopt);
    } else if (calibrate->parsed()) {
      run_calibrate(config, manifest_path, out, workers);
    } else if (fuse_cmd->parsed()) {
      run_fuse(config, manifest_path, depth_dir, out);
    } else if (eval_cmd->parsed()) {
      run_eval(pred, truth, out, std::set<int>(ignore.begin(), ignore.end()));
    }
  } catch (const Error& e) {
    std::cerr << "error[" << e.code_name() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("primivox");
  for (const std::string& a : args) argv_storage.push_back(a);
  std::vector<char*> argv;
  argv.reserve(argv_storage.size());
  for (std::string& s : argv_storage) argv.push_back(s.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace primivox
