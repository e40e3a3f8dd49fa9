// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/render/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace sdfoam::render {

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "camera size must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(Errc::InvalidArgument, "focal lengths must be positive");
  const Mat3 R = rotation();
  if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || std::abs(R.determinant() - 1.0) > 1e-9) {
    throw Error(Errc::InvalidArgument, "camera rotation is not a proper orthonormal matrix");
  }
}

Ray pixel_ray(const Camera& cam, double u, double v) {
  const Vec3 dc((u - cam.cx) / cam.fx, -(v - cam.cy) / cam.fy, -1.0);
  Ray r;
  r.o = cam.center();
  r.d = (cam.rotation() * dc).normalized();
  r.px = static_cast<int>(std::floor(u));
  r.py = static_cast<int>(std::floor(v));
  return r;
}

std::vector<Ray> generate_rays(const Camera& cam) {
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height));
  for (int j = 0; j < cam.height; ++j) {
    for (int i = 0; i < cam.width; ++i) rays.push_back(pixel_ray(cam, i + 0.5, j + 0.5));
  }
  return rays;
}

Eigen::Vector2d project(const Camera& cam, const Vec3& x) {
  const Vec3 xc = cam.rotation().transpose() * (x - cam.center());
  return {cam.cx + cam.fx * xc.x() / -xc.z(), cam.cy - cam.fy * xc.y() / -xc.z()};
}

Eigen::Matrix4d look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 back = (eye - target).normalized();
  const Vec3 right = up.cross(back).normalized();
  const Vec3 true_up = back.cross(right);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 0) = right;
  m.block<3, 1>(0, 1) = true_up;
  m.block<3, 1>(0, 2) = back;
  m.block<3, 1>(0, 3) = eye;
  return m;
}

}  // namespace sdfoam::render
