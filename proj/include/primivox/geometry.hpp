// Pinhole camera model, rigid poses, and pixel/ray/point mappings.
//
// Conventions:
//  - camera frame: x right, y down, z forward (optical axis);
//  - poses are camera-to-world: X_world = R * X_cam + t;
//  - pixel coordinates are continuous with integer values at pixel centers;
//  - depth means the camera-frame z coordinate, not distance along the ray.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "primivox/error.hpp"

namespace primivox {

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // camera-to-world
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();   // camera center

  static Pose identity() { return Pose{}; }

  // Composition: (a * b).apply(x) == a.apply(b.apply(x)).
  Pose operator*(const Pose& other) const;
  Pose inverse() const;

  // Maps a camera-frame point to the world frame.
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  // Throws unless the rotation is orthonormal (within 1e-9) with det +1.
  void validate() const;
};

struct PixelCoord {
  double u = 0, v = 0;
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit length

  Eigen::Vector3d point_at(double s) const { return origin + s * direction; }
};

// Lifts pixel p at depth d into the camera frame:
//   ((u - cx) d / fx, (v - cy) d / fy, d).   Throws on d <= 0.
Eigen::Vector3d backproject(const PixelCoord& p, double depth,
                            const CameraIntrinsics& intr);

struct Projection {
  PixelCoord pixel;
  double depth = 0;           // camera-frame z of the input point
  bool behind_camera = false; // true when z <= 0; pixel is unset in that case
};

// Drops a camera-frame point onto the image plane:
//   (fx X / Z + cx, fy Y / Z + cy).
Projection project(const Eigen::Vector3d& point_cam,
                   const CameraIntrinsics& intr);

struct WarpResult {
  PixelCoord pixel;
  double depth = 0;           // depth of the warped point in the source frame
  bool behind_camera = false; // true when source-frame z <= 1e-6
};

// Reprojects target pixel p (at target-frame depth d) into a source view:
// lift in the target camera, move through world, project in the source camera.
WarpResult warp_pixel(const PixelCoord& p, double depth,
                      const CameraIntrinsics& intr, const Pose& target_pose,
                      const Pose& source_pose);

// World-space ray through pixel p: origin at the camera center, unit direction
// along R * K^-1 * (u, v, 1).
Ray pixel_ray(const PixelCoord& p, const CameraIntrinsics& intr,
              const Pose& pose);

}  // namespace primivox
