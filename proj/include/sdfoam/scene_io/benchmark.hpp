// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/meshx/mesh.hpp"
#include "sdfoam/render/camera.hpp"
#include "sdfoam/scene_io/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace sdfoam::scene_io {

inline constexpr double kCubeHalf = 0.5;  // unit cube centered at the origin
inline constexpr double kRingRadius = 2.5;
inline constexpr double kRingHeight = 0.35;
inline constexpr const char* kGtMeshName = "gt_mesh.ply";

struct CubeBenchmarkOptions {
  int n_train = 60;  // split over two rings
  int n_test = 12;
  int resolution = 128;
  std::uint64_t seed = 0;  // rotates all rings by a seed-derived azimuth
};

/// Texture color of the cube surface at x (per-face hue times a 4x4 checker).
Vec3 cube_albedo(const Vec3& x);

/// First hit of the ray with the cube surface, if any.
std::optional<double> cube_hit(const render::Ray& ray);

/// Cube rendering seen by one camera: color on white plus foreground mask.
void render_cube(const render::Camera& cam, Image& img, Mask& mask);

/// The 12-triangle ground-truth cube with outward winding.
meshx::SurfaceMesh cube_mesh();

/// Benchmark cameras: train rings at z = +-kRingHeight, test rings halfway
/// between them and the equator with azimuths offset from the train views.
std::vector<render::Camera> cube_cameras(const CubeBenchmarkOptions& opt, std::vector<int>* test_ids = nullptr);

/// Writes images/, masks/, gt_mesh.ply and transforms.json into `out`.
/// Throws InvalidArgument for resolution < 32 and IoError on write failure.
Dataset make_cube_benchmark(const std::filesystem::path& out, const CubeBenchmarkOptions& opt = {});

}  // namespace sdfoam::scene_io
