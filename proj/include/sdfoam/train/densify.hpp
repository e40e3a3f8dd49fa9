// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/geometry/delaunay.hpp"
#include "sdfoam/render/scene.hpp"
#include "sdfoam/render/trace.hpp"
#include "sdfoam/train/config.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace sdfoam::train {

/// Per-cell contribution statistics accumulated between densify events.
struct CellStats {
  std::vector<double> weight;     // sum of T_n alpha_n
  std::vector<double> grad_norm;  // sum of per-ray |dL/dp_i|
  std::vector<std::uint32_t> hits;
  int window = 0;  // steps accumulated

  void reset(std::size_t n_sites);
  void accumulate(const render::RenderGrads& g);
  /// weight / hits, 0 for cells never hit.
  double mean_weight(std::size_t i) const;
};

/// Linear growth from cfg.init_sites at step 0 to cfg.max_sites at cfg.warmup_end.
int warmup_target(int step, const TrainConfig& cfg);

struct DensifyParams {
  double split_fraction = 0.05;
  double prune_floor = 1e-3;
  int target_sites = 0;  // split enough to reach this count (0 disables)
  int max_sites = 0;     // hard cap on the resulting count
};

struct DensifyResult {
  int split = 0;
  int pruned = 0;
  /// For each new site, its index before the event; -1 for clones.
  std::vector<std::int64_t> source;
};

/// Prunes small cells (mean neighbor distance at most the median) whose mean
/// per-hit weight is below prune_floor, then clones the best cells by the sum
/// of their weight and gradient-norm ranks. Only cells with non-zero
/// statistics are cloned; each clone sits at p + eps u (u a random unit
/// vector, eps a quarter of the parent's mean neighbor distance) and copies
/// the parent's color and SH. The mesh is rebuilt and the stats reset.
DensifyResult densify_prune(render::Scene& scene, geometry::DelaunayMesh& mesh, CellStats& stats,
                            const DensifyParams& params, std::mt19937_64& rng);

}  // namespace sdfoam::train
