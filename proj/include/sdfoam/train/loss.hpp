// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/field/field.hpp"

#include <memory>
#include <span>
#include <vector>

namespace sdfoam::train {

/// Value and adjoints of L = L_rgb + lambda_eik * L_eik.
struct Loss {
  double total = 0.0;
  double rgb = 0.0;      // mean squared error over rays and channels
  double eikonal = 0.0;  // 0 when lambda_eik == 0
  std::vector<Vec3> d_rendered;
  std::vector<Vec3> d_field_grads;  // dL/d(grad f) at each centroid, lambda included

  std::unique_ptr<field::FieldTape> tape;  // field evaluated at the centroids
};

/// Photometric term only. Throws ShapeMismatch or EmptyBatch.
Loss photometric_loss(std::span<const Vec3> rendered, std::span<const Vec3> target);

/// Full loss; the field is evaluated (with gradients) at the centroids when
/// lambda_eik > 0. Throws ShapeMismatch, or EmptyBatch for an empty ray batch
/// or empty centroid set with lambda_eik > 0.
Loss loss(std::span<const Vec3> rendered, std::span<const Vec3> target, const field::SdfField& field,
          std::span<const Vec3> centroids, double lambda_eik);

/// Pulls the Eikonal adjoints back into field parameters and centroid
/// positions (either span may be empty to skip). The rendered-color adjoint
/// stays in `l.d_rendered` for the renderer. Throws TapeConsumed on reuse.
void loss_backward(Loss& l, const field::SdfField& field, std::span<double> d_params, std::span<Vec3> d_centroids);

}  // namespace sdfoam::train
