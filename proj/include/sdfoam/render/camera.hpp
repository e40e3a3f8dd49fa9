// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace sdfoam::render {

/// Pinhole camera. Camera space follows the OpenGL convention: +x right,
/// +y up, looking down -z. Pixel (i, j) has its center at (i + 0.5, j + 0.5).
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  Eigen::Matrix4d c2w = Eigen::Matrix4d::Identity();  // world-from-camera

  Mat3 rotation() const { return c2w.topLeftCorner<3, 3>(); }
  Vec3 center() const { return c2w.topRightCorner<3, 1>(); }
  Vec3 forward() const { return -rotation().col(2); }

  /// Throws InvalidArgument unless focal lengths are positive, the size is
  /// positive and the rotation is orthonormal with det +1.
  void validate() const;
};

struct Ray {
  Vec3 o;
  Vec3 d;  // unit length
  int px = 0, py = 0;
};

/// Ray through continuous pixel coordinates (u, v).
Ray pixel_ray(const Camera& cam, double u, double v);

/// One ray per pixel center, row-major.
std::vector<Ray> generate_rays(const Camera& cam);

/// Continuous pixel coordinates of a world point in front of the camera.
Eigen::Vector2d project(const Camera& cam, const Vec3& x);

/// Look-at pose: camera at `eye` looking at `target` with `up` hint.
Eigen::Matrix4d look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

}  // namespace sdfoam::render
