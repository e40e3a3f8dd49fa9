// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/meshx/extract.hpp"

#include "sdfoam/field/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdfoam::meshx {

using geometry::DelaunayMesh;
using geometry::SiteId;
using geometry::TetId;

namespace {

DelaunayMesh site_mesh(const scene_io::Snapshot& snap) {
  const auto& pos = snap.scene.sites.positions;
  if (pos.size() < 4) throw Error(Errc::EmptyResult, "fewer than four sites");
  if (snap.sdf.size() != pos.size() || snap.alpha.size() != pos.size()) {
    throw Error(Errc::ShapeMismatch, "snapshot caches do not match sites");
  }
  return DelaunayMesh::build(pos, snap.scene.seed);
}

void check_range(const Range& r, const char* name) {
  if (std::isnan(r.min) || std::isnan(r.max) || r.min > r.max) {
    throw Error(Errc::InvalidArgument, std::string(name) + " range has min > max");
  }
}

// Bounded faces between cells where inside[i] != inside[j], oriented out of
// the inside set and colored by the inside cell.
SurfaceMesh label_boundary(const scene_io::Snapshot& snap, const DelaunayMesh& mesh,
                           const std::vector<std::uint8_t>& inside) {
  FaceCollector fc(mesh);
  for (auto [i, j] : mesh.edges()) {
    if (inside[static_cast<std::size_t>(i)] == inside[static_cast<std::size_t>(j)]) continue;
    if (!inside[static_cast<std::size_t>(i)]) std::swap(i, j);
    fc.add(mesh.voronoi_face(i, j), snap.scene.sites.colors[static_cast<std::size_t>(i)], i);
  }
  return fc.take();
}

}  // namespace

FaceCollector::FaceCollector(const DelaunayMesh& mesh) : mesh_(mesh) {
  const std::size_t nt = mesh.tet_capacity();
  rep_.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) rep_[t] = static_cast<TetId>(t);
  auto find = [&](TetId t) {
    while (rep_[static_cast<std::size_t>(t)] != t) {
      auto& p = rep_[static_cast<std::size_t>(t)];
      p = rep_[static_cast<std::size_t>(p)];
      t = p;
    }
    return t;
  };
  for (std::size_t t = 0; t < nt; ++t) {
    const auto ti = static_cast<TetId>(t);
    if (!mesh.tet_alive(ti) || !mesh.tet_finite(ti)) continue;
    const Vec3& c = mesh.circumcenter(ti);
    for (TetId u : mesh.tet(ti).n) {
      if (u <= ti || !mesh.tet_alive(u) || !mesh.tet_finite(u)) continue;
      if ((mesh.circumcenter(u) - c).norm() > 1e-9 * (1.0 + c.norm())) continue;
      const TetId a = find(ti), b = find(u);
      if (a != b) rep_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
  for (std::size_t t = 0; t < nt; ++t) rep_[t] = find(static_cast<TetId>(t));
}

std::vector<TetId> FaceCollector::distinct_ring(const geometry::VoronoiFace& face) const {
  std::vector<TetId> ring;
  ring.reserve(face.tets.size());
  for (TetId t : face.tets) {
    const TetId r = representative(t);
    if (ring.empty() || ring.back() != r) ring.push_back(r);
  }
  while (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

bool FaceCollector::add(const geometry::VoronoiFace& face, const Vec3& color, std::int32_t cell) {
  if (face.unbounded) return false;
  const auto reps = distinct_ring(face);
  if (reps.size() < 3) return false;
  Vec3 n = Vec3::Zero();
  const Vec3& o = mesh_.circumcenter(reps[0]);
  for (std::size_t k = 1; k + 1 < reps.size(); ++k) {
    n += (mesh_.circumcenter(reps[k]) - o).cross(mesh_.circumcenter(reps[k + 1]) - o);
  }
  if (0.5 * n.norm() <= kMinFaceArea) return false;
  if (vertex_of_tet_.size() < mesh_.tet_capacity()) vertex_of_tet_.resize(mesh_.tet_capacity(), -1);
  std::vector<std::int32_t> ring;
  ring.reserve(reps.size());
  for (TetId t : reps) {
    auto& v = vertex_of_tet_[static_cast<std::size_t>(t)];
    if (v < 0) {
      v = static_cast<std::int32_t>(out_.vertices.size());
      out_.vertices.push_back(mesh_.circumcenter(t));
    }
    ring.push_back(v);
  }
  out_.faces.push_back(std::move(ring));
  out_.face_colors.push_back({quantize_color(color.x()), quantize_color(color.y()), quantize_color(color.z())});
  out_.face_cells.push_back(cell);
  return true;
}

SurfaceMesh extract_sdf(const scene_io::Snapshot& snap, const SdfExtractOptions& opt) {
  if (!(opt.vert_eps > 0.0) || !(opt.cell_tau > opt.vert_eps)) {
    throw Error(Errc::InvalidArgument, "need cell_tau > vert_eps > 0");
  }
  const auto mesh = site_mesh(snap);
  const auto& sdf = snap.sdf;
  const std::size_t n = sdf.size();
  std::vector<std::uint8_t> kept(n, 0);
  std::size_t n_kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(sdf[i]) < opt.cell_tau) {
      kept[i] = 1;
      ++n_kept;
    }
  }
  if (n_kept == 0) throw Error(Errc::EmptyResult, "no cell satisfies |f| < cell_tau");

  // Candidate faces of kept cells, each shared face once.
  std::vector<geometry::VoronoiFace> faces;
  for (std::size_t i = 0; i < n; ++i) {
    if (!kept[i]) continue;
    const auto si = static_cast<SiteId>(i);
    for (SiteId j : mesh.neighbors(si)) {
      if (kept[static_cast<std::size_t>(j)] && j < si) continue;
      auto f = mesh.voronoi_face(si, j);
      if (!f.unbounded) faces.push_back(std::move(f));
    }
  }

  // Field values at every distinct ring vertex.
  FaceCollector fc(mesh);
  std::vector<std::vector<TetId>> rings(faces.size());
  std::vector<std::int32_t> slot(mesh.tet_capacity(), -1);
  std::vector<Vec3> xs;
  for (std::size_t k = 0; k < faces.size(); ++k) {
    rings[k] = fc.distinct_ring(faces[k]);
    for (TetId t : rings[k]) {
      auto& s = slot[static_cast<std::size_t>(t)];
      if (s < 0) {
        s = static_cast<std::int32_t>(xs.size());
        xs.push_back(mesh.circumcenter(t));
      }
    }
  }
  const auto fv = field::sdf_eval(*snap.scene.field, xs);

  for (std::size_t k = 0; k < faces.size(); ++k) {
    auto& f = faces[k];
    int pass = 0;
    for (TetId t : rings[k]) {
      const double v = fv[static_cast<std::size_t>(slot[static_cast<std::size_t>(t)])];
      if ((opt.signed_vertices ? v : std::abs(v)) < opt.vert_eps) ++pass;
    }
    if (pass < 3) continue;
    SiteId a = f.i, b = f.j;
    const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
    const SiteId owner = !kept[ub] || (kept[ua] && std::abs(sdf[ua]) <= std::abs(sdf[ub])) ? a : b;
    if (sdf[ua] > sdf[ub]) {
      std::swap(f.i, f.j);
      std::reverse(f.tets.begin(), f.tets.end());
      std::reverse(f.vertices.begin(), f.vertices.end());
    }
    fc.add(f, snap.scene.sites.colors[static_cast<std::size_t>(owner)], owner);
  }
  auto out = fc.take();
  if (out.empty()) throw Error(Errc::EmptyResult, "no face passes the vertex threshold");
  return out;
}

std::vector<std::uint8_t> retained_sites(const scene_io::Snapshot& snap, const Range& sdf, const Range& alpha) {
  check_range(sdf, "sdf");
  check_range(alpha, "alpha");
  std::vector<std::uint8_t> keep(snap.sdf.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = sdf.contains(snap.sdf[i]) && alpha.contains(snap.alpha[i]);
  return keep;
}

SurfaceMesh extract_retained(const scene_io::Snapshot& snap, const Range& sdf, const Range& alpha) {
  const auto keep = retained_sites(snap, sdf, alpha);
  if (std::none_of(keep.begin(), keep.end(), [](auto k) { return k != 0; })) {
    throw Error(Errc::EmptyResult, "no site is retained");
  }
  const auto mesh = site_mesh(snap);
  auto out = label_boundary(snap, mesh, keep);
  if (out.empty()) throw Error(Errc::EmptyResult, "retained set has no bounded boundary face");
  return out;
}

SurfaceMesh extract_density_baseline(const scene_io::Snapshot& snap, double rho_tau) {
  if (!(rho_tau > 0.0)) throw Error(Errc::InvalidArgument, "rho_tau must be positive");
  const auto mesh = site_mesh(snap);
  std::vector<std::uint8_t> dense(snap.sdf.size());
  for (std::size_t i = 0; i < dense.size(); ++i) dense[i] = snap.scene.mapping.density(snap.sdf[i]) >= rho_tau;
  auto out = label_boundary(snap, mesh, dense);
  if (out.empty()) throw Error(Errc::EmptyResult, "no density contrast at rho_tau");
  return out;
}

ExtractMode parse_mode(std::string_view name) {
  if (name == "sdf") return ExtractMode::Sdf;
  if (name == "retained") return ExtractMode::Retained;
  if (name == "density") return ExtractMode::Density;
  throw Error(Errc::InvalidArgument, "unknown extraction mode '" + std::string(name) + "'");
}

SurfaceMesh run_extraction(const scene_io::Snapshot& snap, const ExtractRequest& req) {
  switch (req.mode) {
    case ExtractMode::Sdf: return extract_sdf(snap, req.sdf_options);
    case ExtractMode::Retained: return extract_retained(snap, req.sdf_range, req.alpha_range);
    case ExtractMode::Density: return extract_density_baseline(snap, req.rho_tau);
  }
  throw Error(Errc::InvalidArgument, "unknown extraction mode");
}

}  // namespace sdfoam::meshx
