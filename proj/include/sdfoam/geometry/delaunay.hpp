// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sdfoam::geometry {

using SiteId = std::int32_t;
using TetId = std::int32_t;

inline constexpr SiteId kInfinite = -1;  // the vertex at infinity closing the hull
inline constexpr TetId kNoTet = -1;

inline constexpr double kEpsMerge = 1e-7;
inline constexpr double kEpsGeom = 1e-6;

struct Tetrahedron {
  std::array<SiteId, 4> v{};  // kInfinite for hull tets
  std::array<TetId, 4> n{};   // n[k] is the tet across the facet opposite v[k]
};

/// Dual face of a Delaunay edge (i, j): ring of circumcenters of the tets
/// around the edge, ordered counter-clockwise about p_j - p_i.
struct VoronoiFace {
  SiteId i = 0;
  SiteId j = 0;
  std::vector<TetId> tets;  // finite tets only, in ring order
  std::vector<Vec3> vertices;
  bool unbounded = false;
};

/// Result of leaving a cell along a ray. `next` is nullopt on escape.
struct CellExit {
  double t_exit = 0.0;
  std::optional<SiteId> next;
};

struct BuildOptions {
  /// Close tiny or flat inputs with four auxiliary far-away vertices. Faces
  /// touching an auxiliary vertex are reported as unbounded.
  bool bounding_tetrahedron = false;
};

/// Incremental Delaunay tetrahedralization (Bowyer-Watson with an infinite
/// vertex) plus the Voronoi dual queries used by traversal and extraction.
///
/// Site ids are stable across insert/remove: id == slot in `positions()`,
/// removed slots stay dead. Degeneracies are resolved by symbolic
/// perturbation keyed on the id, so the triangulation is unique for a given
/// point set and independent of insertion order.
///
/// Mutations are single-writer. All const queries are thread-safe.
class DelaunayMesh {
 public:
  DelaunayMesh() = default;

  static DelaunayMesh build(std::span<const Vec3> points, std::uint64_t seed,
                            BuildOptions options = {});

  SiteId insert(const Vec3& point);
  void remove(SiteId id);

  SiteId locate_cell(const Vec3& x, SiteId hint = kInfinite) const;
  CellExit bisector_exit(const Vec3& origin, const Vec3& dir, SiteId current, double t_entry) const;
  VoronoiFace voronoi_face(SiteId i, SiteId j) const;

  // --- structure access -----------------------------------------------------
  std::span<const Vec3> positions() const { return points_; }
  const Vec3& position(SiteId i) const { return points_[static_cast<std::size_t>(i)]; }
  std::size_t slot_count() const { return points_.size(); }
  std::size_t site_count() const { return n_alive_; }
  bool alive(SiteId i) const;
  bool is_auxiliary(SiteId i) const { return i >= n_user_limit_ && i < aux_end_; }
  bool on_hull(SiteId i) const { return hull_[static_cast<std::size_t>(i)] != 0; }

  /// Delaunay neighbors of a site (finite sites only), sorted ascending.
  std::span<const SiteId> neighbors(SiteId i) const;
  bool is_edge(SiteId i, SiteId j) const;

  std::size_t tet_capacity() const { return tets_.size(); }
  bool tet_alive(TetId t) const { return tet_alive_[static_cast<std::size_t>(t)] != 0; }
  bool tet_finite(TetId t) const;
  const Tetrahedron& tet(TetId t) const { return tets_[static_cast<std::size_t>(t)]; }
  const Vec3& circumcenter(TetId t) const { return circumcenters_[static_cast<std::size_t>(t)]; }
  std::vector<TetId> finite_tets() const;
  std::size_t finite_tet_count() const;

  /// All Delaunay edges (i < j) between finite sites, sorted.
  std::vector<std::pair<SiteId, SiteId>> edges() const;

  /// Mean distance from each site to its non-auxiliary Delaunay neighbors (0
  /// for dead slots and auxiliary vertices).
  std::vector<double> mean_neighbor_distance() const;

 private:
  friend struct DelaunayAccess;

  std::vector<Vec3> points_;
  std::vector<std::int64_t> perturb_key_;  // symbolic perturbation rank per slot
  std::vector<std::uint8_t> point_alive_;
  std::vector<TetId> vertex_tet_;  // one incident tet per vertex
  std::size_t n_alive_ = 0;
  SiteId n_user_limit_ = 0;  // auxiliary vertices live in [n_user_limit_, aux_end_)
  SiteId aux_end_ = 0;

  std::vector<Tetrahedron> tets_;
  std::vector<std::uint8_t> tet_alive_;
  std::vector<TetId> free_tets_;
  TetId hint_ = kNoTet;
  std::uint64_t walk_state_ = 0x9e3779b97f4a7c15ull;
  std::vector<std::uint32_t> tet_mark_;  // cavity search scratch
  std::uint32_t mark_epoch_ = 0;
  std::vector<TetId> scratch_cavity_;
  std::vector<std::pair<TetId, int>> scratch_boundary_;
  std::vector<TetId> scratch_created_;

  // Derived, refreshed after every mutation.
  std::vector<Vec3> circumcenters_;
  std::vector<std::uint32_t> adj_offsets_;
  std::vector<SiteId> adj_sites_;
  std::vector<TetId> adj_tets_;  // one tet containing edge (i, adj_sites_[k])
  std::vector<std::uint8_t> hull_;

  // Construction internals.
  void init_simplex(std::array<SiteId, 4> v);
  TetId new_tet(const std::array<SiteId, 4>& v);
  void free_tet(TetId t);
  TetId locate_tet(const Vec3& p, TetId start);
  bool in_conflict(TetId t, SiteId p) const;
  bool finite_conflict(TetId t, SiteId p) const;
  SiteId insert_slot(SiteId p);
  void remove_slot(SiteId v);
  std::vector<TetId> incident_tets(SiteId v) const;
  void refresh();
  std::uint64_t next_random();
  TetId find_edge_tet(SiteId i, SiteId j) const;
};

}  // namespace sdfoam::geometry
