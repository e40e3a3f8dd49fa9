// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/meshx/mesh.hpp"
#include "sdfoam/scene_io/image.hpp"

#include <cstdint>
#include <vector>

namespace sdfoam::eval {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels of the (masked) pixels, capped at
/// kPsnrCap. Throws ShapeMismatch, or InvalidArgument for an empty mask.
double psnr(const scene_io::Image& a, const scene_io::Image& b, const scene_io::Mask* mask = nullptr);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5, renormalized at
/// the border), C1 = 0.01^2, C2 = 0.03^2, averaged over channels and (masked)
/// pixels.
double ssim(const scene_io::Image& a, const scene_io::Image& b, const scene_io::Mask* mask = nullptr);

/// Area-weighted uniform samples on the surface (polygons fan-triangulated).
std::vector<Vec3> sample_surface(const meshx::SurfaceMesh& m, std::size_t n, std::uint64_t seed);

/// Mean of the two directed mean nearest-neighbor distances between
/// n_samples points per mesh. Throws EmptyMesh.
double chamfer(const meshx::SurfaceMesh& a, const meshx::SurfaceMesh& b, std::size_t n_samples = 100000,
               std::uint64_t seed = 0);

/// Mean distance from each point of `from` to its nearest point in `to`.
double mean_nearest_distance(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

}  // namespace sdfoam::eval
