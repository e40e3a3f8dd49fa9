#include <doctest.h>

#include "sdfoam/geometry/predicates.hpp"

#include <cmath>
#include <random>

using namespace sdfoam;
using namespace sdfoam::geometry;

namespace {

const Vec3 kA(1, 1, 1), kB(1, -1, -1), kC(-1, 1, -1), kD(-1, -1, 1);

}  // namespace

TEST_CASE("orient3d sign convention") {
  const Vec3 o(0, 0, 0), x(1, 0, 0), y(0, 1, 0), z(0, 0, 1);
  CHECK(orient3d(o, x, y, z) == 1);
  CHECK(orient3d(o, y, x, z) == -1);
  CHECK(orient3d(o, x, y, Vec3(3, 7, 0)) == 0);
  CHECK(detail::orient3d_exact(o, x, y, z) == 1);
}

TEST_CASE("insphere: regular tetrahedron and its center") {
  const Vec3 a = kA, b = kB, c = kC, d = kD;
  REQUIRE(orient3d(a, b, c, d) != 0);
  const bool pos = orient3d(a, b, c, d) > 0;
  const Vec3& p = pos ? b : c;
  const Vec3& q = pos ? c : b;
  REQUIRE(orient3d(a, p, q, d) == 1);
  CHECK(insphere(a, p, q, d, Vec3::Zero()) == 1);
  CHECK(insphere(a, p, q, d, Vec3(5, 5, 5)) == -1);
  CHECK(insphere(a, p, q, d, Vec3(-1, -1, -1)) == 0);  // on the circumsphere (cube corner)
  CHECK(detail::insphere_exact(a, p, q, d, Vec3::Zero()) == 1);
  CHECK(detail::insphere_exact(a, p, q, d, Vec3(5, 5, 5)) == -1);
  CHECK(detail::insphere_exact(a, p, q, d, Vec3(-1, -1, -1)) == 0);
}

TEST_CASE("filtered and exact predicates agree on random and near-degenerate input") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  auto rp = [&] { return Vec3(u(rng), u(rng), u(rng)); };
  for (int it = 0; it < 2000; ++it) {
    Vec3 a = rp(), b = rp(), c = rp(), d = rp();
    if (it % 2 == 1) d = a + 0.3 * (b - a) + 0.7 * (c - a) + Vec3::Constant(1e-17 * u(rng));
    CHECK(orient3d(a, b, c, d) == detail::orient3d_exact(a, b, c, d));
    if (orient3d(a, b, c, d) < 0) std::swap(a, b);
    if (orient3d(a, b, c, d) == 0) continue;
    Vec3 e = rp();
    if (it % 3 == 0) {
      // Nearly on the sphere.
      const Vec3 cc = circumcenter(a, b, c, d);
      const double r = (a - cc).norm();
      e = cc + r * rp().normalized();
      if (!e.allFinite()) continue;
    }
    CHECK(insphere(a, b, c, d, e) == detail::insphere_exact(a, b, c, d, e));
  }
}

TEST_CASE("perturbed insphere never returns zero and is consistent") {
  // Cube corners: all cospherical.
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  for (int e = 0; e < 8; ++e) {
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        for (int c = 0; c < 8; ++c)
          for (int d = 0; d < 8; ++d) {
            const std::array<int, 5> ids{a, b, c, d, e};
            bool distinct = true;
            for (int i = 0; i < 5; ++i)
              for (int j = i + 1; j < 5; ++j) distinct &= ids[i] != ids[j];
            if (!distinct || orient3d(pts[a], pts[b], pts[c], pts[d]) <= 0) continue;
            const int s = insphere_perturbed(pts[a], pts[b], pts[c], pts[d], pts[e], {a, b, c, d, e});
            CHECK(s != 0);
            // Invariance under even permutation of the tetrahedron.
            CHECK(s == insphere_perturbed(pts[b], pts[c], pts[a], pts[d], pts[e], {b, c, a, d, e}));
          }
  }
}

TEST_CASE("circumcenter is equidistant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int it = 0; it < 100; ++it) {
    const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng)),
        d(u(rng), u(rng), u(rng));
    const Vec3 cc = circumcenter(a, b, c, d);
    const double r = (a - cc).norm();
    CHECK(std::abs((b - cc).norm() - r) < 1e-6 * std::max(1.0, r));
    CHECK(std::abs((c - cc).norm() - r) < 1e-6 * std::max(1.0, r));
    CHECK(std::abs((d - cc).norm() - r) < 1e-6 * std::max(1.0, r));
  }
}
