// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/train/config.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sdfoam::train {

enum class Group { Positions, Sdf, Beta, Color };

/// "positions", "sdf", "beta" or "color". Throws UnknownGroup.
Group parse_group(std::string_view name);
const char* group_name(Group g);

/// Learning rate at `step` in [0, cfg.iterations]: cosine decay from the
/// group's start to end rate (exact at both endpoints); beta is constant.
/// Throws InvalidArgument outside that range.
double lr_at(Group group, int step, const TrainConfig& cfg);
double lr_at(std::string_view group, int step, const TrainConfig& cfg);

/// Cosine annealing from `start` (step 0) to `end` (step total).
double cosine_rate(double start, double end, int step, int total);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  /// Zero moments for n parameters.
  void reset(std::size_t n);
  /// Keeps moments of old index src[k] at new index k (-1 starts from zero).
  void remap(std::span<const std::int64_t> src, std::size_t stride);
};

/// One bias-corrected Adam update. Moments are created on the first call.
/// Throws ShapeMismatch or NonFiniteGradient (state untouched).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamHyper& hp = {});

}  // namespace sdfoam::train
