#include "primivox/manifest.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace primivox {

namespace {

using nlohmann::json;

void require_rank(const Tensor& t, size_t rank, const char* what) {
  if (t.dims.size() != rank) {
    throw Error(ErrorCode::kFormat,
                std::string(what) + " tensor has wrong rank");
  }
}

void require_dtype(const Tensor& t, TensorDtype dtype, const char* what) {
  if (t.dtype != dtype) {
    throw Error(ErrorCode::kFormat,
                std::string(what) + " tensor has wrong dtype");
  }
}

}  // namespace

Tensor image_to_tensor(const Image& img) {
  std::vector<float> values(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    values[i] = static_cast<float>(img.data[i]);
  }
  return tensor_from_f32({static_cast<uint32_t>(img.height),
                          static_cast<uint32_t>(img.width),
                          static_cast<uint32_t>(img.channels)},
                         std::move(values));
}

Image image_from_tensor(const Tensor& t) {
  require_dtype(t, TensorDtype::kFloat32, "image");
  require_rank(t, 3, "image");
  const int channels = static_cast<int>(t.dims[2]);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kFormat, "image tensor must have 1 or 3 channels");
  }
  Image img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
            channels);
  for (size_t i = 0; i < t.f32.size(); ++i) {
    const double v = t.f32[i];
    if (v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::kFormat, "image values outside [0, 1]");
    }
    img.data[i] = v;
  }
  return img;
}

Tensor depth_to_tensor(const MetricDepthMap& depth) {
  std::vector<float> values(depth.data.size());
  for (size_t i = 0; i < depth.data.size(); ++i) {
    values[i] = static_cast<float>(depth.data[i]);
  }
  return tensor_from_f32({static_cast<uint32_t>(depth.height),
                          static_cast<uint32_t>(depth.width)},
                         std::move(values));
}

MetricDepthMap depth_from_tensor(const Tensor& t) {
  require_dtype(t, TensorDtype::kFloat32, "depth");
  require_rank(t, 2, "depth");
  MetricDepthMap depth(static_cast<int>(t.dims[0]),
                       static_cast<int>(t.dims[1]));
  for (size_t i = 0; i < t.f32.size(); ++i) depth.data[i] = t.f32[i];
  return depth;
}

Tensor rel_depth_to_tensor(const RelativeDepthMap& rel) {
  std::vector<float> values(rel.data.size());
  for (size_t i = 0; i < rel.data.size(); ++i) {
    values[i] = static_cast<float>(rel.data[i]);
  }
  return tensor_from_f32({static_cast<uint32_t>(rel.height),
                          static_cast<uint32_t>(rel.width)},
                         std::move(values));
}

RelativeDepthMap rel_depth_from_tensor(const Tensor& t,
                                       DepthConvention convention) {
  require_dtype(t, TensorDtype::kFloat32, "relative depth");
  require_rank(t, 2, "relative depth");
  std::vector<double> values(t.f32.begin(), t.f32.end());
  return RelativeDepthMap::from_values(static_cast<int>(t.dims[0]),
                                       static_cast<int>(t.dims[1]),
                                       values, convention);
}

Tensor mask_to_tensor(const ValidityMask& mask) {
  return tensor_from_u8({static_cast<uint32_t>(mask.height),
                         static_cast<uint32_t>(mask.width)},
                        mask.data);
}

ValidityMask mask_from_tensor(const Tensor& t) {
  require_dtype(t, TensorDtype::kUint8, "mask");
  require_rank(t, 2, "mask");
  ValidityMask mask(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  for (size_t i = 0; i < t.u8.size(); ++i) {
    if (t.u8[i] > 1) {
      throw Error(ErrorCode::kFormat, "mask values must be 0 or 1");
    }
    mask.data[i] = t.u8[i];
  }
  return mask;
}

Tensor semantic_to_tensor(const SemanticMap& map) {
  if (map.num_classes > 255) {
    throw Error(ErrorCode::kRange, "more than 255 classes cannot serialize");
  }
  std::vector<uint8_t> values(map.labels.size());
  for (size_t i = 0; i < map.labels.size(); ++i) {
    const int32_t label = map.labels[i];
    if (label == kVoidLabel) {
      values[i] = kVoidByte;
    } else if (label >= 0 && label < map.num_classes) {
      values[i] = static_cast<uint8_t>(label);
    } else {
      throw Error(ErrorCode::kRange, "semantic label outside [0, K)");
    }
  }
  return tensor_from_u8({static_cast<uint32_t>(map.height),
                         static_cast<uint32_t>(map.width)},
                        std::move(values));
}

SemanticMap semantic_from_tensor(const Tensor& t, int num_classes) {
  require_dtype(t, TensorDtype::kUint8, "semantic map");
  require_rank(t, 2, "semantic map");
  if (num_classes <= 0 || num_classes > 255) {
    throw Error(ErrorCode::kConfig, "num_classes must lie in [1, 255]");
  }
  SemanticMap map(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  num_classes);
  for (size_t i = 0; i < t.u8.size(); ++i) {
    const uint8_t b = t.u8[i];
    if (b == kVoidByte) {
      map.labels[i] = kVoidLabel;
    } else if (b < num_classes) {
      map.labels[i] = b;
    } else {
      throw Error(ErrorCode::kFormat, "semantic byte outside [0, K) and 255");
    }
  }
  return map;
}

Tensor voxel_to_tensor(const VoxelGrid& grid) {
  std::vector<uint8_t> values(grid.labels.size());
  for (size_t i = 0; i < grid.labels.size(); ++i) {
    const int32_t label = grid.labels[i];
    if (label == kFreeLabel) {
      values[i] = kVoidByte;
    } else if (label >= 0 && label < 255) {
      values[i] = static_cast<uint8_t>(label);
    } else {
      throw Error(ErrorCode::kRange, "voxel label outside [0, 255)");
    }
  }
  return tensor_from_u8({static_cast<uint32_t>(grid.dims[0]),
                         static_cast<uint32_t>(grid.dims[1]),
                         static_cast<uint32_t>(grid.dims[2])},
                        std::move(values));
}

VoxelGrid voxel_from_tensor(const Tensor& t) {
  require_dtype(t, TensorDtype::kUint8, "voxel grid");
  require_rank(t, 3, "voxel grid");
  VoxelGrid grid({static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  static_cast<int>(t.dims[2])});
  for (size_t i = 0; i < t.u8.size(); ++i) {
    grid.labels[i] = (t.u8[i] == kVoidByte) ? kFreeLabel : t.u8[i];
  }
  return grid;
}

Tensor votes_to_tensor(const VoteGrid& votes) {
  std::vector<uint16_t> values(votes.votes.size());
  for (size_t i = 0; i < votes.votes.size(); ++i) {
    if (votes.votes[i] > 65535u) {
      throw Error(ErrorCode::kRange, "vote count exceeds uint16 range");
    }
    values[i] = static_cast<uint16_t>(votes.votes[i]);
  }
  return tensor_from_u16({static_cast<uint32_t>(votes.dims[0]),
                          static_cast<uint32_t>(votes.dims[1]),
                          static_cast<uint32_t>(votes.dims[2]),
                          static_cast<uint32_t>(votes.num_classes)},
                         std::move(values));
}

VoteGrid votes_from_tensor(const Tensor& t) {
  require_dtype(t, TensorDtype::kUint16, "vote grid");
  require_rank(t, 4, "vote grid");
  VoteGrid votes({static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  static_cast<int>(t.dims[2])},
                 static_cast<int>(t.dims[3]));
  for (size_t i = 0; i < t.u16.size(); ++i) votes.votes[i] = t.u16[i];
  return votes;
}

Tensor field_to_tensor(const std::vector<double>& field, int height,
                       int width) {
  if (field.size() != static_cast<size_t>(height) * width) {
    throw Error(ErrorCode::kDimension, "field size mismatch");
  }
  std::vector<float> values(field.size());
  for (size_t i = 0; i < field.size(); ++i) {
    values[i] = static_cast<float>(field[i]);
  }
  return tensor_from_f32(
      {static_cast<uint32_t>(height), static_cast<uint32_t>(width)},
      std::move(values));
}

std::vector<double> field_from_tensor(const Tensor& t, int* height,
                                      int* width) {
  require_dtype(t, TensorDtype::kFloat32, "field");
  require_rank(t, 2, "field");
  *height = static_cast<int>(t.dims[0]);
  *width = static_cast<int>(t.dims[1]);
  return std::vector<double>(t.f32.begin(), t.f32.end());
}

Tensor curve_to_tensor(const std::vector<double>& values) {
  std::vector<float> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(values[i]);
  }
  return tensor_from_f32({static_cast<uint32_t>(values.size())},
                         std::move(out));
}

std::vector<double> curve_from_tensor(const Tensor& t) {
  require_dtype(t, TensorDtype::kFloat32, "curve");
  require_rank(t, 1, "curve");
  return std::vector<double>(t.f32.begin(), t.f32.end());
}

// ---------------------------------------------------------------------------

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_double(const std::string& text) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == 0) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "cannot parse number: " + text);
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot rename " + tmp + " to " + path);
  }
}

void save_kv(const std::string& path,
             const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string content;
  for (const auto& [key, value] : rows) {
    content += key + ": " + value + "\n";
  }
  write_text_atomic(path, content);
}

std::map<std::string, std::string> load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path);
  std::map<std::string, std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t colon = line.find(": ");
    if (colon == std::string::npos) {
      throw Error(ErrorCode::kFormat, "malformed line in " + path);
    }
    rows[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return rows;
}

void save_camera(const std::string& path, const CameraRecord& cam) {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.emplace_back("fx", format_double(cam.intrinsics.fx));
  rows.emplace_back("fy", format_double(cam.intrinsics.fy));
  rows.emplace_back("cx", format_double(cam.intrinsics.cx));
  rows.emplace_back("cy", format_double(cam.intrinsics.cy));
  rows.emplace_back("width", std::to_string(cam.intrinsics.width));
  rows.emplace_back("height", std::to_string(cam.intrinsics.height));
  std::string rot, trans;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!rot.empty()) rot += ' ';
      rot += format_double(cam.pose.rotation(r, c));
    }
  }
  for (int r = 0; r < 3; ++r) {
    if (!trans.empty()) trans += ' ';
    trans += format_double(cam.pose.translation[r]);
  }
  rows.emplace_back("rotation", rot);
  rows.emplace_back("translation", trans);
  save_kv(path, rows);
}

CameraRecord load_camera(const std::string& path) {
  const auto rows = load_kv(path);
  auto get = [&](const char* key) -> const std::string& {
    auto it = rows.find(key);
    if (it == rows.end()) {
      throw Error(ErrorCode::kFormat,
                  std::string("camera record missing ") + key + " in " + path);
    }
    return it->second;
  };
  CameraRecord cam;
  cam.intrinsics.fx = parse_double(get("fx"));
  cam.intrinsics.fy = parse_double(get("fy"));
  cam.intrinsics.cx = parse_double(get("cx"));
  cam.intrinsics.cy = parse_double(get("cy"));
  cam.intrinsics.width = static_cast<int>(parse_double(get("width")));
  cam.intrinsics.height = static_cast<int>(parse_double(get("height")));
  {
    std::istringstream in(get("rotation"));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        std::string tok;
        if (!(in >> tok)) {
          throw Error(ErrorCode::kFormat, "bad rotation in " + path);
        }
        cam.pose.rotation(r, c) = parse_double(tok);
      }
    }
  }
  {
    std::istringstream in(get("translation"));
    for (int r = 0; r < 3; ++r) {
      std::string tok;
      if (!(in >> tok)) {
        throw Error(ErrorCode::kFormat, "bad translation in " + path);
      }
      cam.pose.translation[r] = parse_double(tok);
    }
  }
  cam.intrinsics.validate();
  cam.pose.validate();
  return cam;
}

// ---------------------------------------------------------------------------

FrameManifest FrameManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat,
                "malformed manifest " + path + ": " + e.what());
  }
  FrameManifest manifest;
  manifest.root = std::filesystem::path(path).parent_path().string();
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    throw Error(ErrorCode::kFormat, "manifest missing frames array: " + path);
  }
  for (const json& f : doc["frames"]) {
    FrameEntry entry;
    try {
      entry.name = f.at("name").get<std::string>();
      entry.image = f.at("image").get<std::string>();
      entry.camera = f.at("camera").get<std::string>();
      entry.rel_depth = f.value("rel_depth", "");
      const std::string conv = f.value("depth_convention", "depth");
      if (conv == "depth") {
        entry.depth_convention = DepthConvention::kDepth;
      } else if (conv == "disparity") {
        entry.depth_convention = DepthConvention::kDisparity;
      } else {
        throw Error(ErrorCode::kFormat,
                    "unknown depth convention: " + conv);
      }
      entry.semantics = f.value("semantics", "");
      entry.num_classes = f.value("num_classes", 0);
      entry.static_mask = f.value("static_mask", "");
      if (f.contains("sources")) {
        entry.sources = f.at("sources").get<std::vector<std::string>>();
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat,
                  "bad frame entry in " + path + ": " + e.what());
    }
    if (!entry.semantics.empty() && entry.num_classes <= 0) {
      throw Error(ErrorCode::kFormat,
                  "frame " + entry.name + " has semantics but no num_classes");
    }
    manifest.frames.push_back(std::move(entry));
  }
  return manifest;
}

void FrameManifest::save(const std::string& path) const {
  json doc;
  doc["frames"] = json::array();
  for (const FrameEntry& entry : frames) {
    json f;
    f["name"] = entry.name;
    f["image"] = entry.image;
    f["camera"] = entry.camera;
    if (!entry.rel_depth.empty()) {
      f["rel_depth"] = entry.rel_depth;
      f["depth_convention"] =
          entry.depth_convention == DepthConvention::kDepth ? "depth"
                                                            : "disparity";
    }
    if (!entry.semantics.empty()) {
      f["semantics"] = entry.semantics;
      f["num_classes"] = entry.num_classes;
    }
    if (!entry.static_mask.empty()) f["static_mask"] = entry.static_mask;
    if (!entry.sources.empty()) f["sources"] = entry.sources;
    doc["frames"].push_back(std::move(f));
  }
  write_text_atomic(path, doc.dump(2) + "\n");
}

const FrameEntry& FrameManifest::find(const std::string& name) const {
  for (const FrameEntry& entry : frames) {
    if (entry.name == name) return entry;
  }
  throw Error(ErrorCode::kFormat, "manifest has no frame named " + name);
}

std::string FrameManifest::resolve(const std::string& relative_path) const {
  if (root.empty()) return relative_path;
  return (std::filesystem::path(root) / relative_path).string();
}

FrameBundle load_bundle(const FrameManifest& manifest, const FrameEntry& entry,
                        const std::set<int>& moving_classes) {
  if (!entry.calibratable()) {
    throw Error(ErrorCode::kConfig,
                "frame " + entry.name + " has no depth or no sources");
  }
  FrameBundle bundle;
  bundle.target = image_from_tensor(load_tensor(manifest.resolve(entry.image)));
  const CameraRecord cam = load_camera(manifest.resolve(entry.camera));
  bundle.intrinsics = cam.intrinsics;
  bundle.target_pose = cam.pose;
  bundle.rel_depth = rel_depth_from_tensor(
      load_tensor(manifest.resolve(entry.rel_depth)), entry.depth_convention);
  if (bundle.rel_depth.height != bundle.target.height ||
      bundle.rel_depth.width != bundle.target.width) {
    throw Error(ErrorCode::kDimension,
                "relative depth " + std::to_string(bundle.rel_depth.height) +
                    "x" + std::to_string(bundle.rel_depth.width) +
                    " differs from image " +
                    std::to_string(bundle.target.height) + "x" +
                    std::to_string(bundle.target.width) + " for frame " +
                    entry.name);
  }
  for (const std::string& source_name : entry.sources) {
    const FrameEntry& src_entry = manifest.find(source_name);
    SourceView view;
    view.image =
        image_from_tensor(load_tensor(manifest.resolve(src_entry.image)));
    view.pose = load_camera(manifest.resolve(src_entry.camera)).pose;
    bundle.sources.push_back(std::move(view));
  }
  if (!entry.static_mask.empty()) {
    bundle.static_mask =
        mask_from_tensor(load_tensor(manifest.resolve(entry.static_mask)));
  } else if (!entry.semantics.empty() && !moving_classes.empty()) {
    const SemanticMap sem = semantic_from_tensor(
        load_tensor(manifest.resolve(entry.semantics)), entry.num_classes);
    bundle.static_mask = moving_object_mask(sem, moving_classes);
  } else {
    bundle.static_mask =
        ValidityMask(bundle.target.height, bundle.target.width, true);
  }
  bundle.validate();
  return bundle;
}

}  // namespace primivox
