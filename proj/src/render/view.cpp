// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/render/view.hpp"

namespace sdfoam::render {

PreparedScene prepare(const Scene& scene) {
  scene.sites.check();
  if (!scene.field) throw Error(Errc::InvalidArgument, "scene has no field");
  PreparedScene p;
  p.mesh = DelaunayMesh::build(scene.sites.positions, scene.seed);
  p.sdf = field::sdf_eval(*scene.field, scene.sites.positions);
  p.rho.resize(p.sdf.size());
  for (std::size_t i = 0; i < p.sdf.size(); ++i) p.rho[i] = scene.mapping.density(p.sdf[i]);
  return p;
}

std::vector<Vec3> render_pixels(const Scene& scene, const PreparedScene& prep, const Camera& cam,
                                const TraceOptions& opt) {
  cam.validate();
  const auto rays = generate_rays(cam);
  const auto view = prep.view(scene);
  const SiteId start = prep.mesh.locate_cell(cam.center());
  std::vector<Vec3> out(rays.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rays.size()); ++i) {
    out[static_cast<std::size_t>(i)] = trace(rays[static_cast<std::size_t>(i)], view, start, opt).color;
  }
  return out;
}

}  // namespace sdfoam::render
