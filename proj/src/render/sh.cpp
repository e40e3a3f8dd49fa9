// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/render/sh.hpp"

namespace sdfoam::render {

namespace {
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
}  // namespace

std::array<double, kShCoeffs> sh_basis(const Vec3& d) {
  const double x = d.x(), y = d.y(), z = d.z();
  return {-kC1 * y,
          kC1 * z,
          -kC1 * x,
          kC2[0] * x * y,
          kC2[1] * y * z,
          kC2[2] * (2.0 * z * z - x * x - y * y),
          kC2[3] * x * z,
          kC2[4] * (x * x - y * y)};
}

Vec3 sh_radiance(const Vec3& dc, std::span<const double> coeffs, const Vec3& d) {
  const auto b = sh_basis(d);
  Vec3 c = dc;
  for (int k = 0; k < kShCoeffs; ++k) {
    for (int ch = 0; ch < 3; ++ch) c[ch] += b[static_cast<std::size_t>(k)] * coeffs[static_cast<std::size_t>(3 * k + ch)];
  }
  return c;
}

}  // namespace sdfoam::render
