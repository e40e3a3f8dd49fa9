// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/render/scene.hpp"
#include "sdfoam/render/trace.hpp"

#include <vector>

namespace sdfoam::render {

/// Delaunay mesh and per-site densities of a scene, ready for tracing.
struct PreparedScene {
  DelaunayMesh mesh;
  std::vector<double> sdf;
  std::vector<double> rho;

  SceneView view(const Scene& scene) const {
    return {&mesh, rho, scene.sites.colors, scene.sites.sh, scene.background, scene.center, scene.far_radius};
  }
};

PreparedScene prepare(const Scene& scene);

/// One color per pixel center, row-major.
std::vector<Vec3> render_pixels(const Scene& scene, const PreparedScene& prep, const Camera& cam,
                                const TraceOptions& opt = {});

}  // namespace sdfoam::render
