// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/train/densify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdfoam::train {

void CellStats::reset(std::size_t n_sites) {
  weight.assign(n_sites, 0.0);
  grad_norm.assign(n_sites, 0.0);
  hits.assign(n_sites, 0);
  window = 0;
}

void CellStats::accumulate(const render::RenderGrads& g) {
  if (g.weight.size() != weight.size()) throw Error(Errc::ShapeMismatch, "stats and gradients differ in site count");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += g.weight[i];
    grad_norm[i] += g.pos_grad_norm[i];
    hits[i] += g.hits[i];
  }
  ++window;
}

double CellStats::mean_weight(std::size_t i) const { return hits[i] ? weight[i] / hits[i] : 0.0; }

int warmup_target(int step, const TrainConfig& cfg) {
  if (step >= cfg.warmup_end) return cfg.max_sites;
  if (step <= 0) return cfg.init_sites;
  const double f = static_cast<double>(step) / static_cast<double>(cfg.warmup_end);
  return static_cast<int>(std::lround(cfg.init_sites + (cfg.max_sites - cfg.init_sites) * f));
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < order.size(); ++k) r[order[k]] = static_cast<double>(k);
  return r;
}

}  // namespace

DensifyResult densify_prune(render::Scene& scene, geometry::DelaunayMesh& mesh, CellStats& stats,
                            const DensifyParams& params, std::mt19937_64& rng) {
  auto& sites = scene.sites;
  sites.check();
  const std::size_t n = sites.size();
  if (stats.weight.size() != n) throw Error(Errc::ShapeMismatch, "stats do not match the site count");
  const auto spacing = mesh.mean_neighbor_distance();

  std::vector<double> sorted(spacing.begin(), spacing.begin() + static_cast<std::ptrdiff_t>(n));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
  const double median = n ? sorted[n / 2] : 0.0;

  std::vector<std::uint8_t> keep(n, 1);
  int pruned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (stats.mean_weight(i) < params.prune_floor && spacing[i] <= median) {
      keep[i] = 0;
      ++pruned;
    }
  }

  std::vector<std::size_t> eligible;
  const auto rw = ranks(stats.weight), rg = ranks(stats.grad_norm);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i] && (stats.weight[i] > 0.0 || stats.grad_norm[i] > 0.0)) eligible.push_back(i);
  }
  std::stable_sort(eligible.begin(), eligible.end(), [&](auto a, auto b) { return rw[a] + rg[a] > rw[b] + rg[b]; });

  const long remaining = static_cast<long>(n) - pruned;
  long want = static_cast<long>(std::ceil(params.split_fraction * static_cast<double>(n)));
  if (params.target_sites > 0) want = std::max(want, static_cast<long>(params.target_sites) - remaining);
  if (params.max_sites > 0) want = std::min(want, static_cast<long>(params.max_sites) - remaining);
  const auto n_split = static_cast<std::size_t>(std::clamp(want, 0L, static_cast<long>(eligible.size())));

  DensifyResult res;
  res.pruned = pruned;
  res.split = static_cast<int>(n_split);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) res.source.push_back(static_cast<std::int64_t>(i));
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> new_pos;
  std::vector<Vec3> new_col;
  std::vector<std::size_t> parents;
  for (std::size_t k = 0; k < n_split; ++k) {
    const std::size_t i = eligible[k];
    Vec3 u;
    do {
      u = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (u.norm() < 1e-12);
    u.normalize();
    new_pos.push_back(sites.positions[i] + 0.25 * spacing[i] * u);
    parents.push_back(i);
  }
  sites.compact(keep);
  const auto n_kept = static_cast<std::ptrdiff_t>(res.source.size());
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const std::size_t i = parents[k];
    // Parents are never pruned, so their data is still at the compacted slot.
    const auto slot = static_cast<std::size_t>(
        std::lower_bound(res.source.begin(), res.source.begin() + n_kept, static_cast<std::int64_t>(i)) - res.source.begin());
    const Vec3 color = sites.colors[slot];
    const std::vector<double> sh(sites.sh_of(slot).begin(), sites.sh_of(slot).end());
    sites.push_back(new_pos[k], color, sh);
    res.source.push_back(-1);
  }
  mesh = geometry::DelaunayMesh::build(sites.positions, scene.seed);
  stats.reset(sites.size());
  return res;
}

}  // namespace sdfoam::train
