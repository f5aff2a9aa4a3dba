// Depth map containers shared by the calibration and fusion modules.
//
// A relative depth map is the raw single-view estimate: positive, finite,
// and correct only up to an unknown affine transform. Estimators that emit
// disparity are inverted once at construction so that everything downstream
// works in depth convention. A metric depth map is in meters; pixels that a
// producer could not resolve are flagged in a companion validity mask rather
// than clamped.
#pragma once

#include <cmath>
#include <vector>

#include "primivox/error.hpp"
#include "primivox/image.hpp"

namespace primivox {

enum class DepthConvention { kDepth, kDisparity };

struct RelativeDepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // row-major, depth convention in memory

  RelativeDepthMap() = default;
  RelativeDepthMap(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

  double at(int v, int u) const {
    return data[static_cast<size_t>(v) * width + u];
  }
  double& at(int v, int u) {
    return data[static_cast<size_t>(v) * width + u];
  }

  // Builds a map from raw estimator output. Disparity values are inverted
  // with a 1e-6 floor to avoid division blow-ups; all values must be finite.
  static RelativeDepthMap from_values(int h, int w,
                                      const std::vector<double>& values,
                                      DepthConvention convention);
};

struct MetricDepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // meters, row-major

  MetricDepthMap() = default;
  MetricDepthMap(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

  double at(int v, int u) const {
    return data[static_cast<size_t>(v) * width + u];
  }
  double& at(int v, int u) {
    return data[static_cast<size_t>(v) * width + u];
  }
};

inline RelativeDepthMap RelativeDepthMap::from_values(
    int h, int w, const std::vector<double>& values,
    DepthConvention convention) {
  if (h <= 0 || w <= 0 ||
      values.size() != static_cast<size_t>(h) * static_cast<size_t>(w)) {
    throw Error(ErrorCode::kDimension, "relative depth payload size mismatch");
  }
  RelativeDepthMap map(h, w);
  constexpr double kDisparityFloor = 1e-6;
  for (size_t i = 0; i < values.size(); ++i) {
    const double raw = values[i];
    if (!std::isfinite(raw)) {
      throw Error(ErrorCode::kDomain, "relative depth must be finite");
    }
    map.data[i] = (convention == DepthConvention::kDisparity)
                      ? 1.0 / std::max(raw, kDisparityFloor)
                      : raw;
  }
  return map;
}

}  // namespace primivox
