// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/train/trainer.hpp"

#include "sdfoam/render/trace.hpp"
#include "sdfoam/render/view.hpp"
#include "sdfoam/train/densify.hpp"
#include "sdfoam/train/loss.hpp"
#include "sdfoam/train/optim.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sdfoam::train {

using render::RayTrace;
using render::RenderGrads;
using scene_io::Dataset;
using scene_io::Image;

Vec3 axes_focus(const std::vector<render::Camera>& cams) {
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& c : cams) {
    const Vec3 d = c.forward().normalized();
    const Mat3 p = Mat3::Identity() - d * d.transpose();
    a += p;
    b += p * c.center();
  }
  if (cams.size() < 2) return Vec3::Zero();
  return a.ldlt().solve(b);
}

render::Scene init_scene(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() < 2) throw Error(Errc::InvalidArgument, "training needs at least two views");
  render::Scene s;
  s.seed = cfg.seed;
  s.center = axes_focus(data.cameras);
  double far = 2.0 * cfg.scene_radius;
  for (const auto& c : data.cameras) far = std::max(far, 1.1 * (c.center() - s.center).norm());
  s.far_radius = far;
  s.mapping.raw_beta = std::log(cfg.init_beta);

  field::MlpConfig mc;
  mc.frequencies = cfg.mlp_frequencies;
  mc.hidden = cfg.mlp_hidden;
  mc.layers = cfg.mlp_layers;
  mc.softplus_beta = cfg.softplus_beta;
  mc.init_radius = cfg.init_radius;
  mc.center = s.center;
  mc.seed = cfg.seed;
  s.field = std::make_unique<field::MlpField>(mc);

  std::mt19937_64 rng(cfg.seed ^ 0x5deece66dull);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n_shell = cfg.init_sites * 15 / 100;
  const std::vector<double> sh(render::kShStride, 0.0);
  const Vec3 grey(0.5, 0.5, 0.5);
  for (int k = 0; k < cfg.init_sites - n_shell; ++k) {
    s.sites.push_back(s.center + cfg.scene_radius * Vec3(u(rng), u(rng), u(rng)), grey, sh);
  }
  for (int k = 0; k < n_shell; ++k) {
    Vec3 d(g(rng), g(rng), g(rng));
    d.normalize();
    s.sites.push_back(s.center + 1.5 * cfg.scene_radius * (1.0 + 0.05 * u(rng)) * d, grey, sh);
  }
  return s;
}

namespace {

struct TrainView {
  const render::Camera* cam;
  Image image;
  std::vector<std::uint8_t> mask;  // empty unless masked
};

std::span<double> flat(std::vector<Vec3>& v) { return {v.empty() ? nullptr : v[0].data(), v.size() * 3}; }

double psnr_of_mse(double mse) { return mse > 0.0 ? std::min(99.0, -10.0 * std::log10(mse)) : 99.0; }

double probe_psnr(const render::Scene& scene, const Dataset& data, int k, const Image& target, double t_stop) {
  const auto prep = render::prepare(scene);
  render::TraceOptions opt;
  opt.t_stop = t_stop;
  const auto px = render::render_pixels(scene, prep, data.cameras[static_cast<std::size_t>(k)], opt);
  double se = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) se += (px[i] - target.pixel(i)).squaredNorm();
  return psnr_of_mse(se / (3.0 * static_cast<double>(px.size())));
}

}  // namespace

TrainResult train_loop(const Dataset& data, const TrainConfig& cfg, const LogSink& sink) {
  cfg.validate();
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
  if (data.train_ids.empty()) throw Error(Errc::InvalidArgument, "dataset has no training views");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  render::Scene scene = init_scene(data, cfg);
  res.initial_beta = scene.mapping.beta();

  std::vector<TrainView> views;
  for (int k : data.train_ids) {
    TrainView v{&data.cameras[static_cast<std::size_t>(k)], data.load_image(k), {}};
    if (cfg.masked) {
      const auto m = data.load_mask(k);
      if (!m) throw Error(Errc::MissingFile, "masked training needs a mask for every view");
      v.mask = m->data;
    }
    views.push_back(std::move(v));
  }
  const int probe = data.test_ids.empty() ? data.train_ids.front() : data.test_ids.front();
  const Image probe_image = cfg.iterations > 0 ? data.load_image(probe) : Image{};

  std::mt19937_64 rng(cfg.seed);
  render::TraceOptions topt;
  topt.t_stop = cfg.t_stop;
  const int densify_until = cfg.densify_until > 0 ? cfg.densify_until : cfg.iterations - cfg.densify_interval;

  AdamState st_pos, st_sdf, st_beta, st_col, st_sh, st_bg;
  CellStats stats;
  stats.reset(scene.sites.size());
  geometry::DelaunayMesh mesh;
  std::vector<geometry::SiteId> start_cell(views.size(), geometry::kInfinite);
  bool mesh_dirty = true;

  std::vector<render::Ray> rays(static_cast<std::size_t>(cfg.batch_rays));
  std::vector<Vec3> target(rays.size()), rendered(rays.size());
  std::vector<int> ray_view(rays.size());
  std::vector<RayTrace> traces(rays.size());

  for (int step = 0; step < cfg.iterations; ++step) {
    const std::size_t n = scene.sites.size();
    if (mesh_dirty || step % cfg.rebuild_interval == 0) {
      mesh = geometry::DelaunayMesh::build(scene.sites.positions, scene.seed);
      for (std::size_t v = 0; v < views.size(); ++v) start_cell[v] = mesh.locate_cell(views[v].cam->center());
      mesh_dirty = false;
    }
    auto cache = render::DensityCache::evaluate(scene, {}, true);

    std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const auto v = pick_view(rng);
      const auto& tv = views[v];
      std::uniform_int_distribution<int> px(0, tv.image.width - 1), py(0, tv.image.height - 1);
      const int x = px(rng), y = py(rng);
      rays[r] = render::pixel_ray(*tv.cam, x + 0.5, y + 0.5);
      const std::size_t pi = static_cast<std::size_t>(y) * static_cast<std::size_t>(tv.image.width) + x;
      target[r] = (!tv.mask.empty() && !tv.mask[pi]) ? scene.background : tv.image.pixel(pi);
      ray_view[r] = static_cast<int>(v);
    }

    const render::SceneView view{&mesh,          cache.rho,        scene.sites.colors, scene.sites.sh,
                                 scene.background, scene.center, scene.far_radius};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rays.size()); ++r) {
      const auto ru = static_cast<std::size_t>(r);
      traces[ru] = render::trace(rays[ru], view, start_cell[static_cast<std::size_t>(ray_view[ru])], topt);
      rendered[ru] = traces[ru].color;
    }

    std::uniform_int_distribution<std::size_t> pick_site(0, n - 1);
    std::vector<std::size_t> eik_ids(static_cast<std::size_t>(std::min<std::size_t>(cfg.eik_samples, n)));
    std::vector<Vec3> centroids(eik_ids.size());
    for (std::size_t k = 0; k < eik_ids.size(); ++k) {
      eik_ids[k] = pick_site(rng);
      centroids[k] = scene.sites.positions[eik_ids[k]];
    }
    Loss l = loss(rendered, target, *scene.field, centroids, cfg.lambda_eik);

    // Render backward, one gradient buffer per thread reduced in thread order.
    std::vector<RenderGrads> per_thread;
#pragma omp parallel
    {
#ifdef _OPENMP
      const int nt = omp_get_num_threads(), tid = omp_get_thread_num();
#else
      const int nt = 1, tid = 0;
#endif
#pragma omp single
      {
        per_thread.resize(static_cast<std::size_t>(nt));
        for (auto& g : per_thread) g.reset(n);
      }
#pragma omp for schedule(static)
      for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rays.size()); ++r) {
        const auto ru = static_cast<std::size_t>(r);
        render::backward(traces[ru], l.d_rendered[ru], view, per_thread[static_cast<std::size_t>(tid)]);
      }
    }
    RenderGrads& g = per_thread.front();
    for (std::size_t k = 1; k < per_thread.size(); ++k) g.add(per_thread[k]);

    std::vector<double> d_params(scene.field->param_count(), 0.0);
    double d_raw_beta = 0.0;
    std::vector<Vec3> d_pos = g.d_pos;
    cache.backward(scene, g.d_rho, d_params, d_raw_beta, d_pos);
    std::vector<Vec3> d_centroids(centroids.size(), Vec3::Zero());
    loss_backward(l, *scene.field, d_params, d_centroids);
    for (std::size_t k = 0; k < eik_ids.size(); ++k) d_pos[eik_ids[k]] += d_centroids[k];

    adam_step(flat(scene.sites.positions), flat(d_pos), st_pos, lr_at(Group::Positions, step, cfg));
    adam_step(scene.field->params(), d_params, st_sdf, lr_at(Group::Sdf, step, cfg));
    adam_step(std::span<double>(&scene.mapping.raw_beta, 1), std::span<const double>(&d_raw_beta, 1), st_beta,
              lr_at(Group::Beta, step, cfg));
    const double lr_col = lr_at(Group::Color, step, cfg);
    adam_step(flat(scene.sites.colors), flat(g.d_color), st_col, lr_col);
    adam_step(scene.sites.sh, g.d_sh, st_sh, lr_col);
    if (cfg.learn_background) {
      adam_step(std::span<double>(scene.background.data(), 3), std::span<const double>(g.d_bg.data(), 3), st_bg,
                lr_col);
    }
    stats.accumulate(g);

    const int done = step + 1;
    if (done % cfg.densify_interval == 0 && done <= densify_until) {
      DensifyParams dp;
      dp.split_fraction = cfg.split_fraction;
      dp.prune_floor = cfg.prune_floor;
      dp.target_sites = warmup_target(done, cfg);
      dp.max_sites = dp.target_sites;
      const auto ev = densify_prune(scene, mesh, stats, dp, rng);
      st_pos.remap(ev.source, 3);
      st_col.remap(ev.source, 3);
      st_sh.remap(ev.source, render::kShStride);
      mesh_dirty = true;
    }

    res.batch_psnr.push_back(psnr_of_mse(l.rgb));
    res.eikonal.push_back(l.eikonal);
    if (done % cfg.log_interval == 0 || done == cfg.iterations) {
      LogEntry e;
      e.step = done;
      e.loss = l.total;
      e.rgb = l.rgb;
      e.eikonal = l.eikonal;
      e.batch_psnr = res.batch_psnr.back();
      e.probe_psnr = probe_psnr(scene, data, probe, probe_image, cfg.t_stop);
      e.sites = static_cast<int>(scene.sites.size());
      e.beta = scene.mapping.beta();
      e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.log.push_back(e);
      if (sink) sink(e);
    }
  }
  scene.step = static_cast<std::uint64_t>(cfg.iterations);
  res.snapshot = scene_io::make_snapshot(std::move(scene), data.cameras);
  return res;
}

}  // namespace sdfoam::train
