// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/geometry/predicates.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdfoam::geometry {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon() * 0.5;  // 2^-53
// Shewchuk's stage-A bounds, doubled for slack.
constexpr double kOrientBound = 2.0 * (7.0 + 56.0 * kEps) * kEps;
constexpr double kInsphereBound = 2.0 * (16.0 + 224.0 * kEps) * kEps;

int sign_of(const mpq_class& v) { return sgn(v); }

}  // namespace

namespace detail {

int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  mpq_class m[3][3];
  for (int k = 0; k < 3; ++k) {
    m[0][k] = mpq_class(b[k]) - mpq_class(a[k]);
    m[1][k] = mpq_class(c[k]) - mpq_class(a[k]);
    m[2][k] = mpq_class(d[k]) - mpq_class(a[k]);
  }
  mpq_class det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                  m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                  m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  return sign_of(det);
}

int insphere_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e) {
  const Vec3* p[4] = {&a, &b, &c, &d};
  mpq_class m[4][4];
  for (int r = 0; r < 4; ++r) {
    mpq_class lift = 0;
    for (int k = 0; k < 3; ++k) {
      m[r][k] = mpq_class((*p[r])[k]) - mpq_class(e[k]);
      lift += m[r][k] * m[r][k];
    }
    m[r][3] = lift;
  }
  // Laplace expansion along the lift column using 3x3 minors.
  auto minor3 = [&](int skip) {
    int rows[3];
    int n = 0;
    for (int r = 0; r < 4; ++r) {
      if (r != skip) rows[n++] = r;
    }
    const auto& r0 = m[rows[0]];
    const auto& r1 = m[rows[1]];
    const auto& r2 = m[rows[2]];
    mpq_class v = r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0]) +
                  r0[2] * (r1[0] * r2[1] - r1[1] * r2[0]);
    return v;
  };
  mpq_class det = 0;
  for (int r = 0; r < 4; ++r) {
    // cofactor sign for (r, 3): (-1)^(r+3)
    mpq_class term = m[r][3] * minor3(r);
    if ((r + 3) % 2 == 0) {
      det += term;
    } else {
      det -= term;
    }
  }
  // det[rows (x-e, y-e, z-e, |.|^2)] is negative for e inside a positively
  // oriented (b-a, c-a, d-a) tetrahedron.
  return -sign_of(det);
}

}  // namespace detail

int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const double adx = a.x() - d.x(), bdx = b.x() - d.x(), cdx = c.x() - d.x();
  const double ady = a.y() - d.y(), bdy = b.y() - d.y(), cdy = c.y() - d.y();
  const double adz = a.z() - d.z(), bdz = b.z() - d.z(), cdz = c.z() - d.z();

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;

  // Shewchuk's orient3d is positive when d lies below plane(a, b, c); ours is
  // the negation.
  const double det = adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy) + cdz * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * std::abs(adz) +
                           (std::abs(cdxady) + std::abs(adxcdy)) * std::abs(bdz) +
                           (std::abs(adxbdy) + std::abs(bdxady)) * std::abs(cdz);
  const double bound = kOrientBound * permanent;
  if (det > bound) return -1;
  if (-det > bound) return 1;
  return detail::orient3d_exact(a, b, c, d);
}

int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e) {
  const double aex = a.x() - e.x(), bex = b.x() - e.x(), cex = c.x() - e.x(), dex = d.x() - e.x();
  const double aey = a.y() - e.y(), bey = b.y() - e.y(), cey = c.y() - e.y(), dey = d.y() - e.y();
  const double aez = a.z() - e.z(), bez = b.z() - e.z(), cez = c.z() - e.z(), dez = d.z() - e.z();

  const double aexbey = aex * bey, bexaey = bex * aey;
  const double ab = aexbey - bexaey;
  const double bexcey = bex * cey, cexbey = cex * bey;
  const double bc = bexcey - cexbey;
  const double cexdey = cex * dey, dexcey = dex * cey;
  const double cd = cexdey - dexcey;
  const double dexaey = dex * aey, aexdey = aex * dey;
  const double da = dexaey - aexdey;
  const double aexcey = aex * cey, cexaey = cex * aey;
  const double ac = aexcey - cexaey;
  const double bexdey = bex * dey, dexbey = dex * bey;
  const double bd = bexdey - dexbey;

  const double abc = aez * bc - bez * ac + cez * ab;
  const double bcd = bez * cd - cez * bd + dez * bc;
  const double cda = cez * da + dez * ac + aez * cd;
  const double dab = dez * ab + aez * bd + bez * da;

  const double alift = aex * aex + aey * aey + aez * aez;
  const double blift = bex * bex + bey * bey + bez * bez;
  const double clift = cex * cex + cey * cey + cez * cez;
  const double dlift = dex * dex + dey * dey + dez * dez;

  const double det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);

  const double aezp = std::abs(aez), bezp = std::abs(bez), cezp = std::abs(cez), dezp = std::abs(dez);
  const double aexbeyp = std::abs(aexbey), bexaeyp = std::abs(bexaey);
  const double bexceyp = std::abs(bexcey), cexbeyp = std::abs(cexbey);
  const double cexdeyp = std::abs(cexdey), dexceyp = std::abs(dexcey);
  const double dexaeyp = std::abs(dexaey), aexdeyp = std::abs(aexdey);
  const double aexceyp = std::abs(aexcey), cexaeyp = std::abs(cexaey);
  const double bexdeyp = std::abs(bexdey), dexbeyp = std::abs(dexbey);
  const double permanent =
      ((cexdeyp + dexceyp) * bezp + (dexbeyp + bexdeyp) * cezp + (bexceyp + cexbeyp) * dezp) * alift +
      ((dexaeyp + aexdeyp) * cezp + (aexceyp + cexaeyp) * dezp + (cexdeyp + dexceyp) * aezp) * blift +
      ((aexbeyp + bexaeyp) * dezp + (bexdeyp + dexbeyp) * aezp + (dexaeyp + aexdeyp) * bezp) * clift +
      ((bexceyp + cexbeyp) * aezp + (cexaeyp + aexceyp) * bezp + (aexbeyp + bexaeyp) * cezp) * dlift;
  const double bound = kInsphereBound * permanent;
  // Shewchuk's insphere is positive for e inside when orient3d (his sign) is
  // positive, i.e. when ours is negative. Flip for our orientation.
  if (det > bound) return -1;
  if (-det > bound) return 1;
  return detail::insphere_exact(a, b, c, d, e);
}

int insphere_perturbed(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e,
                       const std::array<std::int64_t, 5>& ids) {
  const int s = insphere(a, b, c, d, e);
  if (s != 0) return s;

  // Perturb the lifted coordinate by eps^(rank of id): examine the leading
  // monomials, largest id first.
  std::array<int, 5> order = {0, 1, 2, 3, 4};
  std::sort(order.begin(), order.end(), [&](int l, int r) { return ids[l] > ids[r]; });
  const Vec3* pts[5] = {&a, &b, &c, &d, &e};
  for (int slot : order) {
    if (slot == 4) return -1;
    const Vec3* q[4] = {pts[0], pts[1], pts[2], pts[3]};
    q[slot] = &e;
    const int o = orient3d(*q[0], *q[1], *q[2], *q[3]);
    if (o != 0) return o;
  }
  return -1;
}

Vec3 circumcenter(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 ba = b - a;
  const Vec3 ca = c - a;
  const Vec3 da = d - a;
  const double lb = ba.squaredNorm();
  const double lc = ca.squaredNorm();
  const double ld = da.squaredNorm();
  const Vec3 num = lb * ca.cross(da) + lc * da.cross(ba) + ld * ba.cross(ca);
  const double den = 2.0 * ba.dot(ca.cross(da));
  return a + num / den;
}

}  // namespace sdfoam::geometry
