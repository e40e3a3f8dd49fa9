// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"
#include "sdfoam/field/field.hpp"
#include "sdfoam/render/sh.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace sdfoam::render {

/// Per-site parameters, index-aligned with the Delaunay site ids.
struct SiteSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;  // DC radiance
  std::vector<double> sh;    // kShStride per site

  std::size_t size() const { return positions.size(); }
  std::span<const double> sh_of(std::size_t i) const {
    return {sh.data() + i * kShStride, static_cast<std::size_t>(kShStride)};
  }
  void push_back(const Vec3& p, const Vec3& color, std::span<const double> coeffs);
  /// Keep sites with keep[i] != 0, preserving order.
  void compact(std::span<const std::uint8_t> keep);
  /// Throws ShapeMismatch if the arrays disagree in length.
  void check() const;
};

/// Everything that defines a reconstructed scene.
struct Scene {
  SiteSet sites;
  std::unique_ptr<field::SdfField> field;
  field::DensityMapping mapping;
  Vec3 background = Vec3::Ones();
  Vec3 center = Vec3::Zero();
  double far_radius = 4.0;  // rays integrate inside this sphere
  std::uint64_t step = 0;
  std::uint64_t seed = 0;

  Scene() = default;
  Scene(const Scene& o);
  Scene& operator=(const Scene& o);
  Scene(Scene&&) noexcept = default;
  Scene& operator=(Scene&&) noexcept = default;
};

/// Field values, gradients and densities at a subset of sites, keeping the
/// field tape so density adjoints can be pulled back to the field parameters,
/// raw_beta and site positions.
class DensityCache {
 public:
  /// Evaluate at `ids` (all sites when empty). Entries for other sites stay 0.
  static DensityCache evaluate(const Scene& scene, std::span<const std::int32_t> ids, bool want_grad);

  std::vector<double> sdf;
  std::vector<double> rho;
  std::vector<Vec3> grad;  // spatial gradient, when requested
  std::vector<std::int32_t> ids;

  /// Accumulates gradients given dL/drho per site (full length).
  void backward(const Scene& scene, std::span<const double> d_rho, std::span<double> d_params, double& d_raw_beta,
                std::span<Vec3> d_pos);

 private:
  std::unique_ptr<field::FieldTape> tape_;
};

}  // namespace sdfoam::render
