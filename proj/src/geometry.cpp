#include "primivox/geometry.hpp"

#include <cmath>

namespace primivox {

namespace {
constexpr double kRotationTol = 1e-9;
constexpr double kMinSourceDepth = 1e-6;
}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kConfig, "focal lengths must be positive finite");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kConfig, "principal point must be finite");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kConfig, "image dims must be positive");
  }
}

Pose Pose::operator*(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.transpose();
  out.translation = -(rotation.transpose() * translation);
  return out;
}

void Pose::validate() const {
  const Eigen::Matrix3d err =
      rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > kRotationTol) {
    throw Error(ErrorCode::kDomain, "pose rotation is not orthonormal");
  }
  if (rotation.determinant() < 0) {
    throw Error(ErrorCode::kDomain, "pose rotation must have determinant +1");
  }
  if (!translation.allFinite()) {
    throw Error(ErrorCode::kDomain, "pose translation must be finite");
  }
}

Eigen::Vector3d backproject(const PixelCoord& p, double depth,
                            const CameraIntrinsics& intr) {
  if (!(depth > 0) || !std::isfinite(depth)) {
    throw Error(ErrorCode::kDomain, "backproject requires depth > 0");
  }
  return {(p.u - intr.cx) * depth / intr.fx,
          (p.v - intr.cy) * depth / intr.fy, depth};
}

Projection project(const Eigen::Vector3d& point_cam,
                   const CameraIntrinsics& intr) {
  Projection out;
  out.depth = point_cam.z();
  if (!(point_cam.z() > 0)) {
    out.behind_camera = true;
    return out;
  }
  out.pixel.u = intr.fx * point_cam.x() / point_cam.z() + intr.cx;
  out.pixel.v = intr.fy * point_cam.y() / point_cam.z() + intr.cy;
  return out;
}

WarpResult warp_pixel(const PixelCoord& p, double depth,
                      const CameraIntrinsics& intr, const Pose& target_pose,
                      const Pose& source_pose) {
  const Eigen::Vector3d point_world = target_pose.apply(backproject(p, depth, intr));
  const Eigen::Vector3d point_src = source_pose.inverse().apply(point_world);
  WarpResult out;
  out.depth = point_src.z();
  if (point_src.z() <= kMinSourceDepth) {
    out.behind_camera = true;
    return out;
  }
  out.pixel.u = intr.fx * point_src.x() / point_src.z() + intr.cx;
  out.pixel.v = intr.fy * point_src.y() / point_src.z() + intr.cy;
  return out;
}

Ray pixel_ray(const PixelCoord& p, const CameraIntrinsics& intr,
              const Pose& pose) {
  const Eigen::Vector3d dir_cam((p.u - intr.cx) / intr.fx,
                                (p.v - intr.cy) / intr.fy, 1.0);
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * dir_cam).normalized();
  return ray;
}

}  // namespace primivox
