// Occupancy-grid evaluation: confusion matrix over K classes plus FREE,
// per-class intersection-over-union with zero-union exclusion, and
// class-agnostic occupancy precision/recall/IoU.
#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "primivox/voxelfuse.hpp"

namespace primivox {

struct ConfusionMatrix {
  int num_classes = 0;             // K; matrix is (K+1)x(K+1), index K = FREE
  std::vector<uint64_t> counts;    // row-major, rows = ground truth

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k)
      : num_classes(k),
        counts(static_cast<size_t>(k + 1) * (k + 1), 0) {}

  uint64_t at(int gt, int pred) const {
    return counts[static_cast<size_t>(gt) * (num_classes + 1) + pred];
  }
  uint64_t& at(int gt, int pred) {
    return counts[static_cast<size_t>(gt) * (num_classes + 1) + pred];
  }

  int free_index() const { return num_classes; }
};

// Voxel-wise confusion between prediction and ground truth. Voxels whose
// ground-truth label is in `ignore` do not count. FREE maps to index K.
ConfusionMatrix confusion(const VoxelGrid& predicted, const VoxelGrid& truth,
                          int num_classes, const std::set<int>& ignore = {});

struct IouReport {
  std::vector<double> iou;        // size K; NaN for excluded classes
  std::vector<bool> included;     // size K; false when the union was zero
  double mean_iou = 0;            // over included classes only
};

// Per-class IoU = TP / (TP + FP + FN) over the K real classes; FREE
// participates in the matrix but never in the mean. Classes with zero union
// are excluded; throws an undefined-metric error if every class is excluded.
IouReport per_class_iou(const ConfusionMatrix& cm);

struct OccupancyReport {
  double iou = 0;
  double precision = 0;
  double recall = 0;
  bool precision_defined = true;  // false when TP+FP == 0 (reported as 0)
  bool iou_defined = true;        // false when TP+FP+FN == 0 (reported as 0)
};

// Binarizes both grids (occupied = any class, free = FREE) and compares.
// Throws an undefined-metric error when the ground truth has no occupied
// voxel; a zero-denominator precision is reported as 0 with a flag.
OccupancyReport occupancy_metrics(const VoxelGrid& predicted,
                                  const VoxelGrid& truth);

}  // namespace primivox
