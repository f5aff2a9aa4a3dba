#include "primivox/metrics.hpp"

#include <cmath>
#include <limits>

namespace primivox {

ConfusionMatrix confusion(const VoxelGrid& predicted, const VoxelGrid& truth,
                          int num_classes, const std::set<int>& ignore) {
  if (predicted.dims != truth.dims) {
    throw Error(ErrorCode::kDimension, "voxel grid shapes differ");
  }
  if (num_classes <= 0) {
    throw Error(ErrorCode::kConfig, "confusion needs at least one class");
  }
  ConfusionMatrix cm(num_classes);
  const int free_idx = cm.free_index();
  for (size_t i = 0; i < truth.labels.size(); ++i) {
    const int32_t gt = truth.labels[i];
    const int32_t pred = predicted.labels[i];
    if (gt != kFreeLabel && (gt < 0 || gt >= num_classes)) {
      throw Error(ErrorCode::kRange, "ground-truth label outside [0, K)");
    }
    if (pred != kFreeLabel && (pred < 0 || pred >= num_classes)) {
      throw Error(ErrorCode::kRange, "predicted label outside [0, K)");
    }
    if (gt != kFreeLabel && ignore.count(gt)) continue;
    const int row = (gt == kFreeLabel) ? free_idx : gt;
    const int col = (pred == kFreeLabel) ? free_idx : pred;
    ++cm.at(row, col);
  }
  return cm;
}

IouReport per_class_iou(const ConfusionMatrix& cm) {
  const int k = cm.num_classes;
  IouReport report;
  report.iou.assign(k, std::numeric_limits<double>::quiet_NaN());
  report.included.assign(k, false);
  double sum = 0.0;
  int included = 0;
  for (int c = 0; c < k; ++c) {
    const uint64_t tp = cm.at(c, c);
    uint64_t fp = 0, fn = 0;
    for (int other = 0; other <= k; ++other) {
      if (other == c) continue;
      fp += cm.at(other, c);  // predicted c, truth something else (or FREE)
      fn += cm.at(c, other);  // truth c, predicted something else (or FREE)
    }
    const uint64_t uni = tp + fp + fn;
    if (uni == 0) continue;  // class absent from both grids: excluded
    report.iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
    report.included[c] = true;
    sum += report.iou[c];
    ++included;
  }
  if (included == 0) {
    throw Error(ErrorCode::kUndefinedMetric,
                "per-class IoU with every class absent");
  }
  report.mean_iou = sum / included;
  return report;
}

OccupancyReport occupancy_metrics(const VoxelGrid& predicted,
                                  const VoxelGrid& truth) {
  if (predicted.dims != truth.dims) {
    throw Error(ErrorCode::kDimension, "voxel grid shapes differ");
  }
  uint64_t tp = 0, fp = 0, fn = 0;
  uint64_t gt_occupied = 0;
  for (size_t i = 0; i < truth.labels.size(); ++i) {
    const bool p = predicted.labels[i] != kFreeLabel;
    const bool g = truth.labels[i] != kFreeLabel;
    gt_occupied += g;
    tp += (p && g);
    fp += (p && !g);
    fn += (!p && g);
  }
  if (gt_occupied == 0) {
    throw Error(ErrorCode::kUndefinedMetric,
                "occupancy recall with empty ground truth");
  }
  OccupancyReport report;
  report.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (tp + fp == 0) {
    report.precision = 0.0;
    report.precision_defined = false;
  } else {
    report.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fp + fn == 0) {
    report.iou = 0.0;
    report.iou_defined = false;
  } else {
    report.iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  }
  return report;
}

}  // namespace primivox
