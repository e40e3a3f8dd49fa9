#include <doctest.h>

#include "../support/scene_fixtures.hpp"
#include "sdfoam/meshx/extract.hpp"

#include <map>
#include <random>
#include <set>

using namespace sdfoam;
using namespace sdfoam::meshx;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

// Layers mirrored across z = 0 over a jittered xy grid, so faces between
// mirrored pairs lie exactly in the plane.
std::vector<Vec3> mirrored_layers(int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.03, 0.03);
  std::vector<Vec3> out;
  const double h = 0.1;
  for (int x = 0; x < k; ++x) {
    for (int y = 0; y < k; ++y) {
      const double px = (x - 0.5 * (k - 1)) * h + u(rng);
      const double py = (y - 0.5 * (k - 1)) * h + u(rng);
      for (double z : {0.04, 0.15}) {
        const double dz = u(rng) * 0.2;
        out.emplace_back(px, py, z + dz);
        out.emplace_back(px, py, -z - dz);
      }
    }
  }
  return out;
}

Vec3 face_normal(const SurfaceMesh& m, std::size_t f) {
  Vec3 n = Vec3::Zero();
  const auto& r = m.faces[f];
  const Vec3& o = m.vertices[static_cast<std::size_t>(r[0])];
  for (std::size_t k = 1; k + 1 < r.size(); ++k) {
    n += (m.vertices[static_cast<std::size_t>(r[k])] - o).cross(m.vertices[static_cast<std::size_t>(r[k + 1])] - o);
  }
  return n;
}

Vec3 face_centroid(const SurfaceMesh& m, std::size_t f) {
  Vec3 c = Vec3::Zero();
  for (auto v : m.faces[f]) c += m.vertices[static_cast<std::size_t>(v)];
  return c / static_cast<double>(m.faces[f].size());
}

}  // namespace

TEST_CASE("plane field yields faces on the zero level set") {
  const auto pts = mirrored_layers(8, 1);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::LinearField>(Vec3(0, 0, 1), 0.0));
  SdfExtractOptions opt;
  opt.cell_tau = 0.07;
  opt.vert_eps = 1e-9;
  const auto m = extract_sdf(snap, opt);
  m.check();
  CHECK(m.face_count() > 0);
  for (const auto& v : m.vertices) CHECK(std::abs(v.z()) < 1e-9);
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    // Oriented toward increasing f.
    CHECK(face_normal(m, f).z() > 0);
    const auto c = static_cast<std::size_t>(m.face_cells[f]);
    CHECK(std::abs(snap.sdf[c]) < opt.cell_tau);
  }
  const auto st = mesh_stats(m);
  CHECK(st.non_manifold_edges == 0);
  CHECK(st.components == 1);

  // Exactly the bounded faces between mirrored inner pairs are found.
  const auto mesh = geometry::DelaunayMesh::build(pts, 0);
  std::size_t expected = 0;
  for (auto [i, j] : mesh.edges()) {
    const auto &a = pts[static_cast<std::size_t>(i)], &b = pts[static_cast<std::size_t>(j)];
    if (a.x() != b.x() || a.y() != b.y() || std::abs(a.z()) >= opt.cell_tau || std::abs(b.z()) >= opt.cell_tau) continue;
    const auto face = mesh.voronoi_face(i, j);
    if (!face.unbounded) ++expected;
  }
  CHECK(m.face_count() == expected);
}

TEST_CASE("every extracted face has three vertices within vert_eps") {
  const auto pts = testing::jittered_points(600, 0.6, 7);
  const auto snap =
      testing::analytic_snapshot(pts, std::make_unique<field::SphereField>(Vec3(0.02, -0.01, 0.03), 0.3));
  for (bool sgn : {false, true}) {
    SdfExtractOptions opt;
    opt.cell_tau = 0.2;
    opt.vert_eps = 0.05;
    opt.signed_vertices = sgn;
    const auto m = extract_sdf(snap, opt);
    m.check();
    std::set<std::pair<int, int>> seen;
    for (std::size_t f = 0; f < m.face_count(); ++f) {
      int pass = 0;
      for (auto v : m.faces[f]) {
        const double d = (m.vertices[static_cast<std::size_t>(v)] - Vec3(0.02, -0.01, 0.03)).norm() - 0.3;
        pass += (sgn ? d : std::abs(d)) < opt.vert_eps + 1e-12;
      }
      CHECK(pass >= 3);
      CHECK(face_normal(m, f).norm() > 0);
    }
    // Faces are unique per ring.
    std::set<std::vector<std::int32_t>> rings;
    for (auto r : m.faces) {
      std::sort(r.begin(), r.end());
      CHECK(rings.insert(r).second);
    }
  }
}

TEST_CASE("sdf extraction parameter and empty-result errors") {
  const auto pts = testing::jittered_points(200, 0.5, 2);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::LinearField>(Vec3(0, 0, 1), 2.0));
  double min_abs = 1e9;
  for (double v : snap.sdf) min_abs = std::min(min_abs, std::abs(v));
  CHECK(code_of([&] { extract_sdf(snap, {.cell_tau = 0.5 * min_abs, .vert_eps = 1e-4}); }) == Errc::EmptyResult);
  CHECK(code_of([&] { extract_sdf(snap, {.cell_tau = 0.1, .vert_eps = 0.0}); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { extract_sdf(snap, {.cell_tau = 0.01, .vert_eps = 0.1}); }) == Errc::InvalidArgument);
  const auto few = testing::analytic_snapshot(testing::jittered_points(3, 0.5, 2),
                                              std::make_unique<field::LinearField>(Vec3(0, 0, 1), 0.0));
  CHECK(code_of([&] { extract_sdf(few); }) == Errc::EmptyResult);
}

TEST_CASE("a single retained interior cell gives a closed polytope") {
  auto pts = testing::jittered_points(300, 1.0, 3);
  pts.emplace_back(0.0, 0.0, 0.0);
  auto snap = testing::analytic_snapshot(pts, std::make_unique<field::SphereField>(Vec3::Zero(), 0.05));
  const auto m = extract_retained(snap, {-1.0, 0.0}, {});
  m.check();
  const auto st = mesh_stats(m);
  CHECK(st.boundary_edges == 0);
  CHECK(st.non_manifold_edges == 0);
  CHECK(st.components == 1);
  const auto mesh = geometry::DelaunayMesh::build(pts, 0);
  CHECK(m.face_count() == mesh.neighbors(static_cast<geometry::SiteId>(pts.size() - 1)).size());
  // Outward orientation: normals point away from the cell site.
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    CHECK(face_normal(m, f).dot(face_centroid(m, f)) > 0);
    CHECK(m.face_cells[f] == static_cast<int>(pts.size() - 1));
  }
  // Colors follow the retained cell.
  const auto& c = snap.scene.sites.colors.back();
  CHECK(m.face_colors[0][0] == quantize_color(c.x()));
}

TEST_CASE("retained ranges select by sdf and alpha") {
  const auto pts = testing::jittered_points(300, 1.0, 4);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::LinearField>(Vec3(1, 0, 0), 0.0), 10.0);
  const auto keep = retained_sites(snap, {-0.2, 0.3}, {0.0, 0.5});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(static_cast<bool>(keep[i]) == (snap.sdf[i] >= -0.2 && snap.sdf[i] <= 0.3 && snap.alpha[i] <= 0.5));
  }
  CHECK(code_of([&] { extract_retained(snap, {1.0, -1.0}, {}); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { extract_retained(snap, {5.0, 6.0}, {}); }) == Errc::EmptyResult);
  // Everything retained leaves only unbounded hull faces.
  CHECK(code_of([&] { extract_retained(snap, {}, {}); }) == Errc::EmptyResult);
}

TEST_CASE("density baseline separates dense from sparse cells") {
  const auto pts = testing::jittered_points(400, 1.0, 5);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::SphereField>(Vec3::Zero(), 0.5), 20.0);
  const double peak = snap.scene.mapping.density(0.0);
  CHECK(code_of([&] { extract_density_baseline(snap, 0.0); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { extract_density_baseline(snap, 2.0 * peak); }) == Errc::EmptyResult);
  const double tau = 0.5 * peak;
  const auto m = extract_density_baseline(snap, tau);
  m.check();
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto c = static_cast<std::size_t>(m.face_cells[f]);
    CHECK(snap.scene.mapping.density(snap.sdf[c]) >= tau);
  }
  CHECK(mesh_stats(m).boundary_edges == 0);
}

TEST_CASE("uniform density has no contrast") {
  const auto pts = testing::jittered_points(100, 1.0, 6);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::LinearField>(Vec3(0, 0, 0), 0.0));
  CHECK(code_of([&] { extract_density_baseline(snap, 1.0); }) == Errc::EmptyResult);
}

TEST_CASE("run_extraction dispatches by mode") {
  CHECK(parse_mode("sdf") == ExtractMode::Sdf);
  CHECK(parse_mode("retained") == ExtractMode::Retained);
  CHECK(parse_mode("density") == ExtractMode::Density);
  CHECK(code_of([] { parse_mode("marching"); }) == Errc::InvalidArgument);

  const auto pts = testing::jittered_points(400, 1.0, 8);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::SphereField>(Vec3::Zero(), 0.5), 20.0);
  ExtractRequest req;
  req.mode = ExtractMode::Density;
  req.rho_tau = 2.0;
  CHECK(encode_ply(run_extraction(snap, req)) == encode_ply(extract_density_baseline(snap, 2.0)));
  req.mode = ExtractMode::Retained;
  req.sdf_range = {-1.0, 0.0};
  CHECK(encode_ply(run_extraction(snap, req)) == encode_ply(extract_retained(snap, {-1.0, 0.0}, {})));
}

TEST_CASE("extraction is deterministic and independent of site order offsets") {
  const auto pts = testing::jittered_points(500, 1.0, 9);
  const auto snap = testing::analytic_snapshot(pts, std::make_unique<field::SphereField>(Vec3::Zero(), 0.45));
  const auto a = extract_sdf(snap, {.cell_tau = 0.2, .vert_eps = 0.05});
  const auto b = extract_sdf(snap, {.cell_tau = 0.2, .vert_eps = 0.05});
  CHECK(encode_ply(a) == encode_ply(b));
}
