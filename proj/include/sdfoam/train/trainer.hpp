// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/scene_io/dataset.hpp"
#include "sdfoam/scene_io/snapshot.hpp"
#include "sdfoam/train/config.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace sdfoam::train {

struct LogEntry {
  int step = 0;
  double loss = 0.0;
  double rgb = 0.0;
  double eikonal = 0.0;
  double batch_psnr = 0.0;
  double probe_psnr = std::numeric_limits<double>::quiet_NaN();
  int sites = 0;
  double beta = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  scene_io::Snapshot snapshot;
  std::vector<LogEntry> log;            // every log_interval steps and the last step
  std::vector<double> batch_psnr;       // per step
  std::vector<double> eikonal;          // per step
  double initial_beta = 0.0;
};

using LogSink = std::function<void(const LogEntry&)>;

/// Point on which the camera optical axes converge (least squares).
Vec3 axes_focus(const std::vector<render::Camera>& cams);

/// Initial scene: field geometrically initialized to a sphere, sites uniform
/// in the scene box plus 15% on a shell at 1.5 scene radii, grey colors,
/// zero SH.
render::Scene init_scene(const scene_io::Dataset& data, const TrainConfig& cfg);

/// Optimizes photometric + Eikonal loss with Adam, growing the site set up to
/// the warm-up target and densifying/pruning periodically. Deterministic for
/// a fixed seed and thread count.
TrainResult train_loop(const scene_io::Dataset& data, const TrainConfig& cfg, const LogSink& sink = {});

}  // namespace sdfoam::train
