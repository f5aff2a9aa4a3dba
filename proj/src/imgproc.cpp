#include "primivox/imgproc.hpp"

#include <cmath>

namespace primivox {

namespace {

// Resolves the interpolation cell for continuous coordinate x on an axis of
// `size` samples. Returns false when x lies outside [0, size-1].
bool resolve_cell(double x, int size, int* lo, double* frac) {
  if (!(x >= 0.0) || !(x <= static_cast<double>(size - 1))) return false;
  int i = static_cast<int>(std::floor(x));
  if (i > size - 2) i = size - 2;  // x == size-1 uses the last cell with frac 1
  if (i < 0) i = 0;                // size == 1 collapses to a single sample
  *lo = i;
  *frac = x - static_cast<double>(i);
  return true;
}

void require_same_shape(const Image& a, const Image& b,
                        const ValidityMask& mask) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kDimension, "image shapes differ");
  }
  if (mask.height != a.height || mask.width != a.width) {
    throw Error(ErrorCode::kDimension, "mask shape differs from images");
  }
}

}  // namespace

SampleValue bilinear_sample(const Image& img, const PixelCoord& p) {
  SampleValue out;
  int u0, v0;
  double fu, fv;
  if (!resolve_cell(p.u, img.width, &u0, &fu) ||
      !resolve_cell(p.v, img.height, &v0, &fv)) {
    return out;
  }
  const int u1 = std::min(u0 + 1, img.width - 1);
  const int v1 = std::min(v0 + 1, img.height - 1);
  const double w00 = (1.0 - fu) * (1.0 - fv);
  const double w10 = fu * (1.0 - fv);
  const double w01 = (1.0 - fu) * fv;
  const double w11 = fu * fv;
  for (int c = 0; c < img.channels; ++c) {
    out.value[c] = w00 * img.at(v0, u0, c) + w10 * img.at(v0, u1, c) +
                   w01 * img.at(v1, u0, c) + w11 * img.at(v1, u1, c);
  }
  out.in_bounds = true;
  return out;
}

SampleGrad bilinear_sample_grad(const Image& img, const PixelCoord& p) {
  SampleGrad out;
  int u0, v0;
  double fu, fv;
  if (!resolve_cell(p.u, img.width, &u0, &fu) ||
      !resolve_cell(p.v, img.height, &v0, &fv)) {
    return out;
  }
  const int u1 = std::min(u0 + 1, img.width - 1);
  const int v1 = std::min(v0 + 1, img.height - 1);
  for (int c = 0; c < img.channels; ++c) {
    const double i00 = img.at(v0, u0, c);
    const double i10 = img.at(v0, u1, c);
    const double i01 = img.at(v1, u0, c);
    const double i11 = img.at(v1, u1, c);
    out.du[c] = (1.0 - fv) * (i10 - i00) + fv * (i11 - i01);
    out.dv[c] = (1.0 - fu) * (i01 - i00) + fu * (i11 - i10);
  }
  out.in_bounds = true;
  return out;
}

double photometric_loss(const Image& target, const Image& synthesized,
                        const ValidityMask& mask) {
  require_same_shape(target, synthesized, mask);
  double sum = 0.0;
  int count = 0;
  const int channels = target.channels;
  for (int v = 0; v < target.height; ++v) {
    for (int u = 0; u < target.width; ++u) {
      if (!mask.at(v, u)) continue;
      double pix = 0.0;
      for (int c = 0; c < channels; ++c) {
        pix += std::abs(target.at(v, u, c) - synthesized.at(v, u, c));
      }
      sum += pix / channels;
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorCode::kDegenerateLoss,
                "photometric loss over an empty valid set");
  }
  return sum / count;
}

namespace {

constexpr int kWin = 3;       // window side
constexpr double kN = 9.0;    // pixels per window

// A window centered at (v, u) is usable when it lies fully inside the image
// and all nine pixels are mask-true.
bool window_valid(const ValidityMask& mask, int v, int u) {
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      if (!mask.at(v + dv, u + du)) return false;
    }
  }
  return true;
}

struct WindowStats {
  double mu_x, mu_y, var_x, var_y, cov;
};

WindowStats window_stats(const Image& x, const Image& y, int v, int u, int c) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      const double a = x.at(v + dv, u + du, c);
      const double b = y.at(v + dv, u + du, c);
      sx += a;
      sy += b;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
    }
  }
  WindowStats s;
  s.mu_x = sx / kN;
  s.mu_y = sy / kN;
  s.var_x = sxx / kN - s.mu_x * s.mu_x;
  s.var_y = syy / kN - s.mu_y * s.mu_y;
  s.cov = sxy / kN - s.mu_x * s.mu_y;
  return s;
}

double window_similarity(const WindowStats& s) {
  const double a1 = 2.0 * s.mu_x * s.mu_y + kSsimC1;
  const double a2 = 2.0 * s.cov + kSsimC2;
  const double b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + kSsimC1;
  const double b2 = s.var_x + s.var_y + kSsimC2;
  return (a1 * a2) / (b1 * b2);
}

}  // namespace

double ssim(const Image& x, const Image& y, const ValidityMask& mask) {
  require_same_shape(x, y, mask);
  double sum = 0.0;
  int windows = 0;
  for (int v = 1; v + 1 < x.height; ++v) {
    for (int u = 1; u + 1 < x.width; ++u) {
      if (!window_valid(mask, v, u)) continue;
      ++windows;
      for (int c = 0; c < x.channels; ++c) {
        sum += window_similarity(window_stats(x, y, v, u, c));
      }
    }
  }
  if (windows == 0) {
    throw Error(ErrorCode::kDegenerateLoss,
                "structural similarity over an empty window set");
  }
  return sum / (static_cast<double>(windows) * x.channels);
}

SsimLossGrad ssim_loss_and_grad(const Image& x, const Image& y,
                                const ValidityMask& mask) {
  require_same_shape(x, y, mask);
  int windows = 0;
  for (int v = 1; v + 1 < x.height; ++v) {
    for (int u = 1; u + 1 < x.width; ++u) {
      if (window_valid(mask, v, u)) ++windows;
    }
  }
  if (windows == 0) {
    throw Error(ErrorCode::kDegenerateLoss,
                "structural similarity over an empty window set");
  }

  SsimLossGrad out;
  out.grad = Image(y.height, y.width, y.channels, 0.0);
  // Same denominator expression as ssim() so both agree bit for bit.
  const double denom = static_cast<double>(windows) * x.channels;
  const double scale = 1.0 / denom;
  double sum = 0.0;
  for (int v = 1; v + 1 < x.height; ++v) {
    for (int u = 1; u + 1 < x.width; ++u) {
      if (!window_valid(mask, v, u)) continue;
      for (int c = 0; c < x.channels; ++c) {
        const WindowStats st = window_stats(x, y, v, u, c);
        const double a1 = 2.0 * st.mu_x * st.mu_y + kSsimC1;
        const double a2 = 2.0 * st.cov + kSsimC2;
        const double b1 = st.mu_x * st.mu_x + st.mu_y * st.mu_y + kSsimC1;
        const double b2 = st.var_x + st.var_y + kSsimC2;
        const double s = (a1 * a2) / (b1 * b2);
        sum += s;
        // d(s)/dy_j assembled from the quotient rule; the mean/cov/variance
        // derivatives all cancel their mean-shift terms exactly.
        const double inv_bb = 1.0 / (b1 * b2);
        const double t_const = 2.0 * st.mu_x * a2 * inv_bb / kN;
        const double t_x = 2.0 * a1 * inv_bb / kN;
        const double t_mu = s * 2.0 * st.mu_y / (b1 * kN);
        const double t_y = s * 2.0 / (b2 * kN);
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const double xj = x.at(v + dv, u + du, c);
            const double yj = y.at(v + dv, u + du, c);
            const double ds = t_const + t_x * (xj - st.mu_x) - t_mu -
                              t_y * (yj - st.mu_y);
            // loss = -mean(s)  =>  d(loss)/dy_j = -scale * ds
            out.grad.at(v + dv, u + du, c) -= scale * ds;
          }
        }
      }
    }
  }
  out.loss = -(sum / denom);
  return out;
}

}  // namespace primivox
