// Image resampling and appearance losses used by the calibration objective:
// bilinear sampling (with analytic spatial gradients), masked mean-absolute
// photometric error, and a masked 3x3 structural similarity score with an
// analytic gradient for its loss form.
#pragma once

#include <array>

#include "primivox/geometry.hpp"
#include "primivox/image.hpp"

namespace primivox {

// Stabilizers for the structural similarity ratio, for intensities in [0, 1].
inline constexpr double kSsimC1 = 1e-4;
inline constexpr double kSsimC2 = 9e-4;

struct SampleValue {
  std::array<double, 3> value{};  // first `channels` entries are meaningful
  bool in_bounds = false;         // false outside [0, W-1] x [0, H-1]
};

// Bilinear interpolation at continuous pixel p. Out-of-bounds points report
// in_bounds = false with zero values.
SampleValue bilinear_sample(const Image& img, const PixelCoord& p);

struct SampleGrad {
  std::array<double, 3> du{};
  std::array<double, 3> dv{};
  bool in_bounds = false;
};

// Spatial derivative of bilinear_sample with respect to (u, v), constant
// within each interpolation cell. Out-of-bounds points report zeros.
SampleGrad bilinear_sample_grad(const Image& img, const PixelCoord& p);

// Mean over mask-true pixels of the per-channel mean absolute difference.
// Throws a degenerate-loss error when no pixel is valid.
double photometric_loss(const Image& target, const Image& synthesized,
                        const ValidityMask& mask);

// Mean local structural similarity over 3x3 windows that lie fully in bounds
// with all nine pixels mask-true. Window statistics are population statistics
// (divide by 9); channels are averaged. Throws a degenerate-loss error when
// no window is valid.
double ssim(const Image& x, const Image& y, const ValidityMask& mask);

struct SsimLossGrad {
  double loss = 0;  // -ssim(x, y)
  Image grad;       // d(loss)/dy, same shape as y; zero at never-covered pixels
};

// Loss form of the similarity score (loss = -ssim) together with its exact
// gradient with respect to the second image.
SsimLossGrad ssim_loss_and_grad(const Image& x, const Image& y,
                                const ValidityMask& mask);

}  // namespace primivox
