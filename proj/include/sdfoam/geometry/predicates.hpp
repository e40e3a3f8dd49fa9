// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

namespace sdfoam::geometry {

/// Sign of det[b - a, c - a, d - a]. Positive when (a, b, c, d) is a
/// positively oriented tetrahedron. Filtered floating point with an exact
/// rational fallback, so the sign is always correct.
int orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// For a positively oriented tetrahedron (a, b, c, d): +1 if e lies strictly
/// inside its circumsphere, -1 if strictly outside, 0 if cospherical.
int insphere(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e);

/// In-sphere test under symbolic perturbation of the lifted coordinate, keyed
/// by the integer ids of the five points (larger id = larger perturbation).
/// Never returns 0 as long as (a, b, c, d) is non-degenerate.
int insphere_perturbed(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                       const Vec3& e, const std::array<std::int64_t, 5>& ids);

/// Circumcenter of a tetrahedron (plain double precision).
Vec3 circumcenter(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

namespace detail {
/// Exact-arithmetic versions, exposed for tests.
int orient3d_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);
int insphere_exact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& e);
}  // namespace detail

}  // namespace sdfoam::geometry
