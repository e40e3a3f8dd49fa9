// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/train/optim.hpp"

#include "sdfoam/core/types.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sdfoam::train {

Group parse_group(std::string_view name) {
  if (name == "positions") return Group::Positions;
  if (name == "sdf") return Group::Sdf;
  if (name == "beta") return Group::Beta;
  if (name == "color") return Group::Color;
  throw Error(Errc::UnknownGroup, "unknown parameter group '" + std::string(name) + "'");
}

const char* group_name(Group g) {
  switch (g) {
    case Group::Positions: return "positions";
    case Group::Sdf: return "sdf";
    case Group::Beta: return "beta";
    case Group::Color: return "color";
  }
  return "?";
}

double cosine_rate(double start, double end, int step, int total) {
  if (step <= 0 || total <= 0) return start;
  if (step >= total) return end;
  const double c = std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total));
  return end + 0.5 * (start - end) * (1.0 + c);
}

double lr_at(Group group, int step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.iterations) {
    throw Error(Errc::InvalidArgument, "step " + std::to_string(step) + " outside [0, " +
                                           std::to_string(cfg.iterations) + "]");
  }
  switch (group) {
    case Group::Positions: return cosine_rate(cfg.lr_pos_start, cfg.lr_pos_end, step, cfg.iterations);
    case Group::Sdf: return cosine_rate(cfg.lr_sdf_start, cfg.lr_sdf_end, step, cfg.iterations);
    case Group::Beta: return cfg.lr_beta;
    case Group::Color: return cosine_rate(cfg.lr_color_start, cfg.lr_color_end, step, cfg.iterations);
  }
  throw Error(Errc::UnknownGroup, "unknown parameter group");
}

double lr_at(std::string_view group, int step, const TrainConfig& cfg) { return lr_at(parse_group(group), step, cfg); }

void AdamState::reset(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
}

void AdamState::remap(std::span<const std::int64_t> src, std::size_t stride) {
  std::vector<double> nm(src.size() * stride, 0.0), nv(src.size() * stride, 0.0);
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k] < 0) continue;
    const auto s = static_cast<std::size_t>(src[k]) * stride;
    if (s + stride > m.size()) throw Error(Errc::ShapeMismatch, "remap source out of range");
    for (std::size_t c = 0; c < stride; ++c) {
      nm[k * stride + c] = m[s + c];
      nv[k * stride + c] = v[s + c];
    }
  }
  m = std::move(nm);
  v = std::move(nv);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamHyper& hp) {
  if (grads.size() != params.size()) throw Error(Errc::ShapeMismatch, "gradient and parameter sizes differ");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(Errc::NonFiniteGradient, "gradient entry " + std::to_string(i) + " is not finite");
    }
  }
  if (state.m.empty() && state.v.empty()) state.reset(params.size());
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "optimizer moments do not match parameters");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

}  // namespace sdfoam::train
