// Dense row-major image and per-pixel validity mask containers.
//
// Pixel coordinates are continuous: integer (u, v) falls on a pixel center,
// u runs along columns (width) and v along rows (height). Image values are
// stored as double in [0, 1]; loaders are responsible for range validation.
#pragma once

#include <cstdint>
#include <vector>

#include "primivox/error.hpp"

namespace primivox {

struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;  // size height*width*channels, row-major [v][u][c]

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {
    if (h <= 0 || w <= 0 || (c != 1 && c != 3)) {
      throw Error(ErrorCode::kDimension,
                  "image dims must be positive with 1 or 3 channels");
    }
  }

  double at(int v, int u, int c) const {
    return data[(static_cast<size_t>(v) * width + u) * channels + c];
  }
  double& at(int v, int u, int c) {
    return data[(static_cast<size_t>(v) * width + u) * channels + c];
  }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width &&
           channels == other.channels;
  }
};

struct ValidityMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // size height*width, row-major, 0 or 1

  ValidityMask() = default;
  ValidityMask(int h, int w, bool value = true)
      : height(h), width(w),
        data(static_cast<size_t>(h) * w, value ? 1 : 0) {
    if (h <= 0 || w <= 0) {
      throw Error(ErrorCode::kDimension, "mask dims must be positive");
    }
  }

  bool at(int v, int u) const {
    return data[static_cast<size_t>(v) * width + u] != 0;
  }
  void set(int v, int u, bool value) {
    data[static_cast<size_t>(v) * width + u] = value ? 1 : 0;
  }

  bool same_shape(const ValidityMask& other) const {
    return height == other.height && width == other.width;
  }

  int count() const {
    int n = 0;
    for (uint8_t b : data) n += (b != 0);
    return n;
  }
};

}  // namespace primivox
