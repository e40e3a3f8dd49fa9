// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sdfoam::meshx {

/// Polygon soup with per-face color and source cell.
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::vector<std::int32_t>> faces;  // vertex-index rings
  std::vector<std::array<std::uint8_t, 3>> face_colors;
  std::vector<std::int32_t> face_cells;  // owning site, -1 if none

  std::size_t face_count() const { return faces.size(); }
  bool empty() const { return faces.empty(); }
  /// Throws ShapeMismatch/InvalidArgument on inconsistent arrays or indices.
  void check() const;
};

struct MeshStats {
  std::size_t faces = 0;
  std::size_t components = 0;
  std::size_t boundary_edges = 0;
  std::size_t non_manifold_edges = 0;  // edges shared by more than two faces
  double area = 0.0;
};

MeshStats mesh_stats(const SurfaceMesh& m);

double polygon_area(const SurfaceMesh& m, std::size_t face);

/// Fan triangulation from the ring centroid (adds one vertex per n-gon, n > 3).
SurfaceMesh triangulate(const SurfaceMesh& m);

/// Binary little-endian PLY: double x/y/z, face list (uchar count, int
/// indices), uchar red/green/blue and int cell per face.
std::string encode_ply(const SurfaceMesh& m);
void write_ply(const SurfaceMesh& m, const std::filesystem::path& path);
SurfaceMesh decode_ply(const std::string& bytes);
SurfaceMesh read_ply(const std::filesystem::path& path);

/// Wavefront OBJ with an MTL library holding one material per distinct color.
void write_obj(const SurfaceMesh& m, const std::filesystem::path& obj_path);

std::uint8_t quantize_color(double v);

}  // namespace sdfoam::meshx
