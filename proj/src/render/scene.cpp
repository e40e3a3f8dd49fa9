// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/render/scene.hpp"

#include <numeric>

namespace sdfoam::render {

void SiteSet::push_back(const Vec3& p, const Vec3& color, std::span<const double> coeffs) {
  if (coeffs.size() != static_cast<std::size_t>(kShStride)) throw Error(Errc::ShapeMismatch, "bad SH coefficient count");
  positions.push_back(p);
  colors.push_back(color);
  sh.insert(sh.end(), coeffs.begin(), coeffs.end());
}

void SiteSet::compact(std::span<const std::uint8_t> keep) {
  check();
  if (keep.size() != size()) throw Error(Errc::ShapeMismatch, "keep mask does not match site count");
  std::size_t w = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!keep[i]) continue;
    positions[w] = positions[i];
    colors[w] = colors[i];
    std::copy_n(sh.begin() + static_cast<std::ptrdiff_t>(i * kShStride), kShStride,
                sh.begin() + static_cast<std::ptrdiff_t>(w * kShStride));
    ++w;
  }
  positions.resize(w);
  colors.resize(w);
  sh.resize(w * kShStride);
}

void SiteSet::check() const {
  if (colors.size() != positions.size() || sh.size() != positions.size() * kShStride) {
    throw Error(Errc::ShapeMismatch, "site arrays are not index-aligned");
  }
}

Scene::Scene(const Scene& o)
    : sites(o.sites),
      field(o.field ? o.field->clone() : nullptr),
      mapping(o.mapping),
      background(o.background),
      center(o.center),
      far_radius(o.far_radius),
      step(o.step),
      seed(o.seed) {}

Scene& Scene::operator=(const Scene& o) {
  if (this != &o) {
    Scene tmp(o);
    *this = std::move(tmp);
  }
  return *this;
}

DensityCache DensityCache::evaluate(const Scene& scene, std::span<const std::int32_t> ids, bool want_grad) {
  DensityCache c;
  const std::size_t n = scene.sites.size();
  if (ids.empty()) {
    c.ids.resize(n);
    std::iota(c.ids.begin(), c.ids.end(), 0);
  } else {
    c.ids.assign(ids.begin(), ids.end());
  }
  std::vector<Vec3> xs;
  xs.reserve(c.ids.size());
  for (auto i : c.ids) xs.push_back(scene.sites.positions[static_cast<std::size_t>(i)]);
  c.tape_ = scene.field->forward(xs, want_grad);
  c.sdf.assign(n, 0.0);
  c.rho.assign(n, 0.0);
  if (want_grad) c.grad.assign(n, Vec3::Zero());
  for (std::size_t k = 0; k < c.ids.size(); ++k) {
    const auto i = static_cast<std::size_t>(c.ids[k]);
    c.sdf[i] = c.tape_->values[k];
    c.rho[i] = scene.mapping.density(c.sdf[i]);
    if (want_grad) c.grad[i] = c.tape_->grads[k];
  }
  return c;
}

void DensityCache::backward(const Scene& scene, std::span<const double> d_rho, std::span<double> d_params,
                            double& d_raw_beta, std::span<Vec3> d_pos) {
  if (!tape_) throw Error(Errc::TapeConsumed, "density cache has no tape");
  std::vector<double> d_f(ids.size(), 0.0);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto i = static_cast<std::size_t>(ids[k]);
    if (d_rho[i] == 0.0) continue;
    d_f[k] = d_rho[i] * scene.mapping.d_density_df(sdf[i]);
    d_raw_beta += d_rho[i] * scene.mapping.d_density_draw(sdf[i]);
    if (!d_pos.empty() && !grad.empty()) d_pos[i] += d_f[k] * grad[i];
  }
  scene.field->backward(*tape_, d_f, {}, d_params, {});
}

}  // namespace sdfoam::render
