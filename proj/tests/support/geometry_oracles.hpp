// Brute-force reference checks shared by unit and acceptance tests.
#pragma once

#include "sdfoam/geometry/delaunay.hpp"
#include "sdfoam/geometry/predicates.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace sdfoam::testing {

using geometry::DelaunayMesh;
using geometry::SiteId;

inline std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

/// Number of (tet, point) pairs where the point lies strictly inside the
/// circumsphere, using exact predicates. Points far outside a long-double
/// circumsphere (relative margin 1e-6) of a non-sliver tet are skipped before
/// the exact test.
inline std::size_t empty_sphere_violations(const DelaunayMesh& m) {
  std::size_t bad = 0;
  for (auto t : m.finite_tets()) {
    const auto& v = m.tet(t).v;
    const Vec3 &a = m.position(v[0]), &b = m.position(v[1]), &c = m.position(v[2]), &d = m.position(v[3]);
    if (geometry::detail::orient3d_exact(a, b, c, d) <= 0) {
      ++bad;
      continue;
    }
    using LV = Eigen::Matrix<long double, 3, 1>;
    const LV la = a.cast<long double>();
    const LV u = b.cast<long double>() - la, w = c.cast<long double>() - la, z = d.cast<long double>() - la;
    const LV num = u.squaredNorm() * w.cross(z) + w.squaredNorm() * z.cross(u) + z.squaredNorm() * u.cross(w);
    const LV center = la + num / (2 * u.dot(w.cross(z)));
    const long double r2 = (center - la).squaredNorm();
    const long double vol = std::abs(u.dot(w.cross(z)));
    const bool usable = std::isfinite(static_cast<double>(r2)) && vol > 1e-6L * u.norm() * w.norm() * z.norm();
    for (std::size_t i = 0; i < m.slot_count(); ++i) {
      const auto s = static_cast<SiteId>(i);
      if (!m.alive(s) || s == v[0] || s == v[1] || s == v[2] || s == v[3]) continue;
      if (usable && (m.position(s).cast<long double>() - center).squaredNorm() > r2 * (1 + 1e-6L)) continue;
      if (geometry::detail::insphere_exact(a, b, c, d, m.position(s)) > 0) ++bad;
    }
  }
  return bad;
}

/// Exhaustive nearest site, lowest id on ties.
inline SiteId nearest_site(const DelaunayMesh& m, const Vec3& x) {
  SiteId best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.slot_count(); ++i) {
    const auto s = static_cast<SiteId>(i);
    if (!m.alive(s)) continue;
    const double d = (m.position(s) - x).squaredNorm();
    if (d < bd) {
      bd = d;
      best = s;
    }
  }
  return best;
}

struct ChainCell {
  SiteId cell;
  double t0, t1;
};

inline std::vector<ChainCell> traverse_chain(const DelaunayMesh& m, const Vec3& o, const Vec3& d, double t_max) {
  std::vector<ChainCell> out;
  SiteId cur = m.locate_cell(o);
  double t = 0.0;
  for (int step = 0; step < 100000; ++step) {
    const auto ex = m.bisector_exit(o, d, cur, t);
    out.push_back({cur, t, std::min(ex.t_exit, t_max)});
    if (!ex.next || ex.t_exit >= t_max) break;
    t = ex.t_exit;
    cur = *ex.next;
  }
  return out;
}

/// Dense-sampling oracle: each of `samples` points along the ray must lie in
/// the chain cell covering it (equidistance ties tolerated). Returns failures.
inline std::size_t traversal_mismatches(const DelaunayMesh& m, const Vec3& o, const Vec3& d, double t_max,
                                        int samples = 10000) {
  const auto chain = traverse_chain(m, o, d, t_max);
  std::size_t bad = 0;
  std::size_t k = 0;
  for (int s = 0; s < samples; ++s) {
    const double t = (s + 0.5) * t_max / samples;
    while (k + 1 < chain.size() && chain[k].t1 < t) ++k;
    const Vec3 x = o + t * d;
    const SiteId truth = nearest_site(m, x);
    const SiteId got = chain[k].cell;
    if (truth == got) continue;
    const double dt = (m.position(truth) - x).norm();
    const double dg = (m.position(got) - x).norm();
    if (std::abs(dt - dg) > 1e-9) ++bad;
  }
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (!m.is_edge(chain[i].cell, chain[i + 1].cell)) ++bad;
  }
  return bad;
}

}  // namespace sdfoam::testing
