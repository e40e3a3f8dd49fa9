// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

#include <array>
#include <span>

namespace sdfoam::render {

inline constexpr int kShDegree = 2;
/// Coefficients per channel beyond the DC color.
inline constexpr int kShCoeffs = (kShDegree + 1) * (kShDegree + 1) - 1;
/// Doubles per site, laid out [coefficient][channel].
inline constexpr int kShStride = 3 * kShCoeffs;

/// Real SH basis for degrees 1..2 evaluated at unit direction d, in the order
/// (-y, z, -x), (xy, yz, 3z^2 - 1, xz, x^2 - y^2) with the usual constants.
std::array<double, kShCoeffs> sh_basis(const Vec3& d);

/// DC color plus the view-dependent terms; no clamping.
Vec3 sh_radiance(const Vec3& dc, std::span<const double> coeffs, const Vec3& d);

}  // namespace sdfoam::render
