// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/geometry/delaunay.hpp"
#include "sdfoam/meshx/mesh.hpp"
#include "sdfoam/scene_io/snapshot.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace sdfoam::meshx {

inline constexpr double kDefaultCellTau = 0.1;
inline constexpr double kDefaultVertEps = 0.001;
inline constexpr double kMinFaceArea = 1e-12;

struct Range {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  bool contains(double v) const { return v >= min && v <= max; }
};

struct SdfExtractOptions {
  double cell_tau = kDefaultCellTau;
  double vert_eps = kDefaultVertEps;
  /// Compare signed f(v) < vert_eps at face vertices instead of |f(v)|.
  bool signed_vertices = false;
};

/// Cells with |f(p_i)| < cell_tau, then their bounded faces having at least
/// three ring vertices that pass the vert_eps test. Faces shared by two kept
/// cells are emitted once, oriented toward increasing f and colored by the
/// owning cell (the one with the smaller |f|). Throws EmptyResult when no cell
/// or face passes and InvalidArgument unless cell_tau > vert_eps > 0.
SurfaceMesh extract_sdf(const scene_io::Snapshot& snap, const SdfExtractOptions& opt = {});

/// Sites with sdf in `sdf` and alpha in `alpha` (both from the snapshot cache).
std::vector<std::uint8_t> retained_sites(const scene_io::Snapshot& snap, const Range& sdf, const Range& alpha);

/// Bounded Voronoi faces separating retained from non-retained cells,
/// oriented out of the retained set. Throws InvalidArgument for min > max and
/// EmptyResult when nothing is retained or no bounded boundary face exists.
SurfaceMesh extract_retained(const scene_io::Snapshot& snap, const Range& sdf, const Range& alpha);

/// Faces between cells whose density labels rho_i >= rho_tau differ,
/// oriented from dense to sparse. Throws InvalidArgument for rho_tau <= 0 and
/// EmptyResult without contrast.
SurfaceMesh extract_density_baseline(const scene_io::Snapshot& snap, double rho_tau);

enum class ExtractMode { Sdf, Retained, Density };

/// Parameters of one extraction, shared by the CLI and the service.
struct ExtractRequest {
  ExtractMode mode = ExtractMode::Sdf;
  SdfExtractOptions sdf_options;
  Range sdf_range;
  Range alpha_range;
  double rho_tau = 0.0;
};

/// "sdf", "retained" or "density". Throws InvalidArgument.
ExtractMode parse_mode(std::string_view name);

SurfaceMesh run_extraction(const scene_io::Snapshot& snap, const ExtractRequest& req);

/// Face emission shared by the extractors: bounded faces (i, j) with vertices
/// shared through their tet ids. Adjacent tets with coincident circumcenters
/// (cospherical sites) map to one vertex.
class FaceCollector {
 public:
  explicit FaceCollector(const geometry::DelaunayMesh& mesh);
  /// Returns false when the face is unbounded or degenerate.
  bool add(const geometry::VoronoiFace& face, const Vec3& color, std::int32_t cell);
  SurfaceMesh take() { return std::move(out_); }

  /// Representative tet of the circumcenter cluster containing t.
  geometry::TetId representative(geometry::TetId t) const { return rep_[static_cast<std::size_t>(t)]; }
  /// Ring of distinct representatives (consecutive repeats collapsed).
  std::vector<geometry::TetId> distinct_ring(const geometry::VoronoiFace& face) const;

 private:
  const geometry::DelaunayMesh& mesh_;
  SurfaceMesh out_;
  std::vector<geometry::TetId> rep_;
  std::vector<std::int32_t> vertex_of_tet_;
};

}  // namespace sdfoam::meshx
