// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/geometry/delaunay.hpp"
#include "sdfoam/render/camera.hpp"

#include <span>
#include <vector>

namespace sdfoam::render {

using geometry::DelaunayMesh;
using geometry::SiteId;

struct TraceOptions {
  double t_stop = 1e-4;  // stop once transmittance falls below this
  int max_steps = 4096;
};

/// Piece of a ray inside one cell. `next` is the cell entered at t_exit, or
/// kInfinite when the ray leaves the integration range instead.
struct CellSpan {
  SiteId cell = 0;
  double t_entry = 0.0;
  double t_exit = 0.0;
  SiteId next = geometry::kInfinite;
};

struct Segment {
  CellSpan span;
  double rho = 0.0;
  double alpha = 0.0;
  double transmittance = 1.0;  // T_n before this segment
  Vec3 radiance = Vec3::Zero();
};

struct RayTrace {
  Ray ray;
  std::vector<Segment> segments;
  double t_final = 1.0;  // transmittance left after the last segment
  Vec3 color = Vec3::Zero();
  Vec3 background = Vec3::Zero();
  bool consumed = false;
};

/// Read-only scene data needed to composite.
struct SceneView {
  const DelaunayMesh* mesh = nullptr;
  std::span<const double> rho;
  std::span<const Vec3> colors;
  std::span<const double> sh;
  Vec3 background = Vec3::Zero();
  Vec3 center = Vec3::Zero();
  double far_radius = 4.0;
};

/// Far end of the integration range: where the ray leaves the sphere.
double far_distance(const Ray& ray, const Vec3& center, double radius);

/// Cells crossed by the ray over [0, t_far], starting from the cell
/// containing the origin (`start`, or located when kInfinite).
std::vector<CellSpan> traverse(const Ray& ray, const DelaunayMesh& mesh, double t_far, SiteId start,
                               const TraceOptions& opt = {});

/// Front-to-back compositing over precomputed spans.
RayTrace composite(const Ray& ray, std::span<const CellSpan> spans, const SceneView& view,
                   const TraceOptions& opt = {});

/// traverse + composite, stopping traversal once transmittance is spent.
RayTrace trace(const Ray& ray, const SceneView& view, SiteId start = geometry::kInfinite,
               const TraceOptions& opt = {});

/// Gradient buffers for a batch of traces (one instance per thread).
struct RenderGrads {
  std::vector<double> d_rho;
  std::vector<Vec3> d_color;
  std::vector<double> d_sh;
  std::vector<Vec3> d_pos;
  Vec3 d_bg = Vec3::Zero();
  // Per-cell contribution statistics.
  std::vector<double> weight;         // sum of T_n alpha_n
  std::vector<double> pos_grad_norm;  // sum of |dL/dp| per ray
  std::vector<std::uint32_t> hits;

  void reset(std::size_t n_sites);
  void add(const RenderGrads& o);
};

/// Backpropagate dL/dcolor of one trace. Throws TapeConsumed on reuse.
void backward(RayTrace& tr, const Vec3& d_color, const SceneView& view, RenderGrads& out);

/// d t_ij / d p_i and d t_ij / d p_j for the bisector crossing of a ray.
void bisector_time_grad(const Vec3& o, const Vec3& d, const Vec3& pi, const Vec3& pj, double t, Vec3& dt_dpi,
                        Vec3& dt_dpj);

}  // namespace sdfoam::render
