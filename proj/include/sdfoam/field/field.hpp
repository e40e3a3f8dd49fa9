// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sdfoam::field {

/// Recorded forward pass of an SdfField over a batch of positions. Owns the
/// outputs; the subclass keeps whatever it needs to backpropagate once.
class FieldTape {
 public:
  virtual ~FieldTape() = default;

  std::vector<double> values;
  std::vector<Vec3> grads;  // empty unless requested
  bool consumed = false;
};

/// Implicit scalar field f_theta: R^3 -> R with a flat parameter vector.
class SdfField {
 public:
  virtual ~SdfField() = default;

  virtual std::string kind() const = 0;
  virtual std::unique_ptr<SdfField> clone() const = 0;

  /// Evaluate values (and spatial gradients when `want_grad`).
  virtual std::unique_ptr<FieldTape> forward(std::span<const Vec3> xs, bool want_grad) const = 0;

  /// Values only, without recording a tape.
  virtual std::vector<double> evaluate(std::span<const Vec3> xs) const;

  /// Accumulate dL/dparams and dL/dx given adjoints of values and gradients.
  /// `d_grads` may be empty when the tape holds no gradients. `d_xs` may be
  /// empty to skip position gradients. Throws TapeConsumed on reuse.
  virtual void backward(FieldTape& tape, std::span<const double> d_values, std::span<const Vec3> d_grads,
                        std::span<double> d_params, std::span<Vec3> d_xs) const = 0;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

 protected:
  std::vector<double> params_;
};

/// Values only.
std::vector<double> sdf_eval(const SdfField& f, std::span<const Vec3> xs);
/// Spatial gradients only.
std::vector<Vec3> sdf_grad(const SdfField& f, std::span<const Vec3> xs);

struct MlpConfig {
  int frequencies = 6;  // positional-encoding octaves
  int hidden = 64;
  int layers = 4;  // hidden layers
  double softplus_beta = 100.0;
  double init_radius = 0.5;
  Vec3 center = Vec3::Zero();
  std::uint64_t seed = 0;
};

/// MLP over a sin/cos positional encoding with softplus activations,
/// geometrically initialized to approximate |x - center| - init_radius.
class MlpField final : public SdfField {
 public:
  explicit MlpField(const MlpConfig& cfg = {});
  /// Architecture only; parameters are taken as given (e.g. from a snapshot).
  MlpField(const MlpConfig& cfg, std::span<const double> params);

  std::string kind() const override { return "mlp"; }
  std::unique_ptr<SdfField> clone() const override;
  std::unique_ptr<FieldTape> forward(std::span<const Vec3> xs, bool want_grad) const override;
  std::vector<double> evaluate(std::span<const Vec3> xs) const override;
  void backward(FieldTape& tape, std::span<const double> d_values, std::span<const Vec3> d_grads,
                std::span<double> d_params, std::span<Vec3> d_xs) const override;

  const MlpConfig& config() const { return cfg_; }
  int input_dim() const { return 3 + 6 * cfg_.frequencies; }
  static std::size_t param_count_for(const MlpConfig& cfg);

 private:
  MlpConfig cfg_;
  struct Layer {
    std::size_t w = 0, b = 0;  // offsets into params_
    int in = 0, out = 0;
  };
  std::vector<Layer> layers_;  // hidden layers then the output layer

  void layout();
  void geometric_init();
};

/// f(x) = n.x + c. Parameters: n (3), c (1).
class LinearField final : public SdfField {
 public:
  LinearField(const Vec3& n, double c);
  std::string kind() const override { return "linear"; }
  std::unique_ptr<SdfField> clone() const override;
  std::unique_ptr<FieldTape> forward(std::span<const Vec3> xs, bool want_grad) const override;
  void backward(FieldTape& tape, std::span<const double> d_values, std::span<const Vec3> d_grads,
                std::span<double> d_params, std::span<Vec3> d_xs) const override;
};

/// f(x) = |x - c| - r. Parameters: c (3), r (1).
class SphereField final : public SdfField {
 public:
  SphereField(const Vec3& c, double r);
  std::string kind() const override { return "sphere"; }
  std::unique_ptr<SdfField> clone() const override;
  std::unique_ptr<FieldTape> forward(std::span<const Vec3> xs, bool want_grad) const override;
  void backward(FieldTape& tape, std::span<const double> d_values, std::span<const Vec3> d_grads,
                std::span<double> d_params, std::span<Vec3> d_xs) const override;
};

/// rho = beta * s * (1 - s), s = sigmoid(beta * f), beta = exp(raw_beta).
struct DensityMapping {
  double raw_beta = std::log(10.0);

  double beta() const { return std::exp(raw_beta); }
  double density(double f) const;
  double d_density_df(double f) const;
  double d_density_draw(double f) const;
};

struct EikonalResult {
  double loss = 0.0;
  std::vector<Vec3> d_grads;  // dloss / d(grad f) per sample
};

/// (1/N) sum (|g_i| - 1)^2. Throws EmptyBatch for N = 0.
EikonalResult eikonal_loss(std::span<const Vec3> grads);

/// Convenience: eikonal loss of `f` at `xs`.
double eikonal_loss(const SdfField& f, std::span<const Vec3> xs);

}  // namespace sdfoam::field
