// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sdfoam::train {

/// Training hyperparameters. Every field has a key of the same name in the
/// flat `key = value` config format (`#` starts a comment).
struct TrainConfig {
  int iterations = 5000;
  int batch_rays = 2048;
  double lambda_eik = 0.01;
  int eik_samples = 1024;  // sites per step used for the Eikonal term

  double lr_pos_start = 2e-4;
  double lr_pos_end = 5e-6;
  double lr_sdf_start = 5e-4;
  double lr_sdf_end = 5e-5;
  double lr_beta = 0.05;
  double lr_color_start = 5e-3;
  double lr_color_end = 5e-4;

  int init_sites = 2000;
  int max_sites = 10000;
  int warmup_end = 2500;
  int densify_interval = 500;
  int densify_until = 0;  // last step allowed to densify; 0 means iterations - densify_interval
  double split_fraction = 0.05;
  double prune_floor = 1e-3;  // mean per-hit weight below which small cells are pruned
  int rebuild_interval = 1;

  double scene_radius = 1.0;  // half extent of the initial site box
  double init_radius = 0.5;   // radius of the initial SDF sphere
  double init_beta = 10.0;
  int mlp_frequencies = 6;
  int mlp_hidden = 64;
  int mlp_layers = 4;
  double softplus_beta = 100.0;
  bool learn_background = true;
  bool masked = false;  // replace pixels outside the mask by the background

  int log_interval = 250;
  double t_stop = 1e-4;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 uses all hardware threads

  /// Throws InvalidArgument when a rate is not positive, an interval is < 1
  /// or a count is out of range.
  void validate() const;

  /// Sets one key from its text value. Throws InvalidArgument for unknown
  /// keys or unparsable values.
  void set(std::string_view key, std::string_view value);

  /// Applies `key = value` lines.
  void parse(std::string_view text);

  /// All keys as `key = value` lines in declaration order.
  std::string to_string() const;

  static std::vector<std::string> keys();
};

TrainConfig load_config(const std::filesystem::path& path);

}  // namespace sdfoam::train
