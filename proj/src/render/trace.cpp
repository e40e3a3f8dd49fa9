// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/render/trace.hpp"

#include "sdfoam/render/sh.hpp"

#include <cmath>
#include <string>

namespace sdfoam::render {

double far_distance(const Ray& ray, const Vec3& center, double radius) {
  const Vec3 oc = ray.o - center;
  const double b = oc.dot(ray.d);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc <= 0.0) return 0.0;
  return std::max(0.0, -b + std::sqrt(disc));
}

namespace {

// Advance one cell; returns false when the span ends the integration range.
bool step_span(const Ray& ray, const DelaunayMesh& mesh, double t_far, SiteId cur, double t, CellSpan& out) {
  const auto ex = mesh.bisector_exit(ray.o, ray.d, cur, t);
  out.cell = cur;
  out.t_entry = t;
  if (!ex.next || ex.t_exit >= t_far) {
    out.t_exit = std::max(t, t_far);
    out.next = geometry::kInfinite;
    return false;
  }
  out.t_exit = ex.t_exit;
  out.next = *ex.next;
  return true;
}

[[noreturn]] void overflow(int max_steps) {
  throw Error(Errc::TraversalOverflow, "ray crossed more than " + std::to_string(max_steps) + " cells");
}

}  // namespace

std::vector<CellSpan> traverse(const Ray& ray, const DelaunayMesh& mesh, double t_far, SiteId start,
                               const TraceOptions& opt) {
  std::vector<CellSpan> spans;
  SiteId cur = mesh.alive(start) ? start : mesh.locate_cell(ray.o);
  double t = 0.0;
  for (int steps = 0;; ++steps) {
    if (steps >= opt.max_steps) overflow(opt.max_steps);
    CellSpan s;
    const bool more = step_span(ray, mesh, t_far, cur, t, s);
    spans.push_back(s);
    if (!more) break;
    t = s.t_exit;
    cur = s.next;
  }
  return spans;
}

namespace {

// Shared compositing step. Returns false once transmittance is spent.
bool accumulate(RayTrace& tr, const CellSpan& s, const SceneView& view, double& T, const TraceOptions& opt) {
  Segment seg;
  seg.span = s;
  seg.rho = view.rho[static_cast<std::size_t>(s.cell)];
  const double delta = std::max(0.0, s.t_exit - s.t_entry);
  seg.alpha = -std::expm1(-seg.rho * delta);
  seg.transmittance = T;
  const auto c = static_cast<std::size_t>(s.cell);
  seg.radiance = sh_radiance(view.colors[c], {view.sh.data() + c * kShStride, static_cast<std::size_t>(kShStride)},
                             tr.ray.d);
  tr.color += T * seg.alpha * seg.radiance;
  T *= 1.0 - seg.alpha;
  tr.segments.push_back(seg);
  return T >= opt.t_stop;
}

}  // namespace

RayTrace composite(const Ray& ray, std::span<const CellSpan> spans, const SceneView& view, const TraceOptions& opt) {
  RayTrace tr;
  tr.ray = ray;
  tr.background = view.background;
  double T = 1.0;
  for (const auto& s : spans) {
    if (!accumulate(tr, s, view, T, opt)) break;
  }
  tr.t_final = T;
  tr.color += T * view.background;
  return tr;
}

RayTrace trace(const Ray& ray, const SceneView& view, SiteId start, const TraceOptions& opt) {
  const DelaunayMesh& mesh = *view.mesh;
  RayTrace tr;
  tr.ray = ray;
  tr.background = view.background;
  const double t_far = far_distance(ray, view.center, view.far_radius);
  SiteId cur = mesh.alive(start) ? start : mesh.locate_cell(ray.o);
  double t = 0.0;
  double T = 1.0;
  for (int steps = 0;; ++steps) {
    if (steps >= opt.max_steps) overflow(opt.max_steps);
    CellSpan s;
    const bool more = step_span(ray, mesh, t_far, cur, t, s);
    if (!accumulate(tr, s, view, T, opt) || !more) break;
    t = s.t_exit;
    cur = s.next;
  }
  tr.t_final = T;
  tr.color += T * view.background;
  return tr;
}

void RenderGrads::reset(std::size_t n) {
  d_rho.assign(n, 0.0);
  d_color.assign(n, Vec3::Zero());
  d_sh.assign(n * kShStride, 0.0);
  d_pos.assign(n, Vec3::Zero());
  d_bg = Vec3::Zero();
  weight.assign(n, 0.0);
  pos_grad_norm.assign(n, 0.0);
  hits.assign(n, 0);
}

void RenderGrads::add(const RenderGrads& o) {
  for (std::size_t i = 0; i < d_rho.size(); ++i) {
    d_rho[i] += o.d_rho[i];
    d_color[i] += o.d_color[i];
    d_pos[i] += o.d_pos[i];
    weight[i] += o.weight[i];
    pos_grad_norm[i] += o.pos_grad_norm[i];
    hits[i] += o.hits[i];
  }
  for (std::size_t i = 0; i < d_sh.size(); ++i) d_sh[i] += o.d_sh[i];
  d_bg += o.d_bg;
}

void bisector_time_grad(const Vec3& o, const Vec3& d, const Vec3& pi, const Vec3& pj, double t, Vec3& dt_dpi,
                        Vec3& dt_dpj) {
  const Vec3 x = o + t * d;
  const double den = d.dot(pj - pi);
  dt_dpj = (pj - x) / den;
  dt_dpi = (x - pi) / den;
}

void backward(RayTrace& tr, const Vec3& g, const SceneView& view, RenderGrads& out) {
  if (tr.consumed) throw Error(Errc::TapeConsumed, "ray trace already used by a backward pass");
  tr.consumed = true;
  const std::size_t n = tr.segments.size();
  const auto basis = sh_basis(tr.ray.d);
  std::vector<double> d_delta(n + 1, 0.0);
  Vec3 behind = tr.background;  // radiance composited behind segment k
  for (std::size_t k = n; k-- > 0;) {
    const Segment& s = tr.segments[k];
    const auto c = static_cast<std::size_t>(s.span.cell);
    const double w = s.transmittance * s.alpha;
    const Vec3 dc = w * g;
    out.d_color[c] += dc;
    for (int b = 0; b < kShCoeffs; ++b) {
      for (int ch = 0; ch < 3; ++ch) out.d_sh[c * kShStride + static_cast<std::size_t>(3 * b + ch)] += basis[static_cast<std::size_t>(b)] * dc[ch];
    }
    const double d_alpha = s.transmittance * (s.radiance - behind).dot(g);
    behind = s.alpha * s.radiance + (1.0 - s.alpha) * behind;
    const double delta = std::max(0.0, s.span.t_exit - s.span.t_entry);
    out.d_rho[c] += d_alpha * delta * (1.0 - s.alpha);
    d_delta[k] = d_alpha * s.rho * (1.0 - s.alpha);
    out.weight[c] += w;
    out.hits[c] += 1;
  }
  out.d_bg += tr.t_final * g;

  const DelaunayMesh& mesh = *view.mesh;
  for (std::size_t k = 0; k < n; ++k) {
    const CellSpan& s = tr.segments[k].span;
    if (s.next == geometry::kInfinite || s.t_exit <= s.t_entry) continue;
    const double dt = d_delta[k] - d_delta[k + 1];
    if (dt == 0.0) continue;
    Vec3 gi, gj;
    bisector_time_grad(tr.ray.o, tr.ray.d, mesh.position(s.cell), mesh.position(s.next), s.t_exit, gi, gj);
    out.d_pos[static_cast<std::size_t>(s.cell)] += dt * gi;
    out.d_pos[static_cast<std::size_t>(s.next)] += dt * gj;
    out.pos_grad_norm[static_cast<std::size_t>(s.cell)] += std::abs(dt) * gi.norm();
    out.pos_grad_norm[static_cast<std::size_t>(s.next)] += std::abs(dt) * gj.norm();
  }
}

}  // namespace sdfoam::render
