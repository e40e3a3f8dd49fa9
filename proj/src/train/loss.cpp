// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/train/loss.hpp"

namespace sdfoam::train {

Loss photometric_loss(std::span<const Vec3> rendered, std::span<const Vec3> target) {
  if (rendered.size() != target.size()) throw Error(Errc::ShapeMismatch, "rendered and target batches differ in size");
  if (rendered.empty()) throw Error(Errc::EmptyBatch, "empty ray batch");
  Loss l;
  const double scale = 1.0 / (3.0 * static_cast<double>(rendered.size()));
  l.d_rendered.resize(rendered.size());
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const Vec3 d = rendered[i] - target[i];
    l.rgb += d.squaredNorm();
    l.d_rendered[i] = 2.0 * scale * d;
  }
  l.rgb *= scale;
  l.total = l.rgb;
  return l;
}

Loss loss(std::span<const Vec3> rendered, std::span<const Vec3> target, const field::SdfField& field,
          std::span<const Vec3> centroids, double lambda_eik) {
  Loss l = photometric_loss(rendered, target);
  if (lambda_eik == 0.0) return l;
  if (centroids.empty()) throw Error(Errc::EmptyBatch, "no centroids for the Eikonal term");
  l.tape = field.forward(centroids, true);
  auto eik = field::eikonal_loss(l.tape->grads);
  l.eikonal = eik.loss;
  l.total = l.rgb + lambda_eik * eik.loss;
  l.d_field_grads = std::move(eik.d_grads);
  for (auto& g : l.d_field_grads) g *= lambda_eik;
  return l;
}

void loss_backward(Loss& l, const field::SdfField& field, std::span<double> d_params, std::span<Vec3> d_centroids) {
  if (!l.tape) return;
  if (l.tape->consumed) throw Error(Errc::TapeConsumed, "loss tape already consumed");
  const std::vector<double> zeros(l.d_field_grads.size(), 0.0);
  std::vector<double> scratch;
  if (d_params.empty()) {
    scratch.assign(field.param_count(), 0.0);
    d_params = scratch;
  }
  field.backward(*l.tape, zeros, l.d_field_grads, d_params, d_centroids);
}

}  // namespace sdfoam::train
