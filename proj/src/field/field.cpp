// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/field/field.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numbers>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sdfoam::field {

namespace {

using Mat = Eigen::MatrixXd;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;

constexpr std::size_t kChunk = 256;

void check_tape(FieldTape& tape) {
  if (tape.consumed) throw Error(Errc::TapeConsumed, "field tape already used by a backward pass");
  tape.consumed = true;
}

// Softplus with sharpness b: log(1 + exp(b z)) / b, written stably.
inline double softplus(double z, double b) {
  const double t = b * z;
  return (std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)))) / b;
}
inline double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

// Vectorized softplus and its slope sigmoid(b z) over a block of
// pre-activations; one exp and one log per entry.
void activate(const Eigen::Ref<const Eigen::MatrixXd>& z, double b, Eigen::MatrixXd& act, Eigen::MatrixXd& slope) {
  const Eigen::ArrayXXd t = b * z.array();
  const Eigen::ArrayXXd e = (-t.abs()).exp();
  const Eigen::ArrayXXd inv = 1.0 / (1.0 + e);
  act = ((t.max(0.0) + (1.0 + e).log()) / b).matrix();
  slope = (t >= 0.0).select(inv, e * inv).matrix();
}

}  // namespace

std::vector<double> SdfField::evaluate(std::span<const Vec3> xs) const { return std::move(forward(xs, false)->values); }

std::vector<double> sdf_eval(const SdfField& f, std::span<const Vec3> xs) { return f.evaluate(xs); }

std::vector<Vec3> sdf_grad(const SdfField& f, std::span<const Vec3> xs) {
  return std::move(f.forward(xs, true)->grads);
}

// --- MlpField ---------------------------------------------------------------

namespace {

struct MlpChunk {
  std::size_t begin = 0, n = 0;
  Mat a0;             // encoded inputs (+ tangents)
  std::vector<Mat> z; // pre-activations per hidden layer (+ tangents)
};

class MlpTape final : public FieldTape {
 public:
  std::vector<Vec3> xs;
  std::vector<MlpChunk> chunks;
  bool with_grad = false;
};

}  // namespace

std::size_t MlpField::param_count_for(const MlpConfig& cfg) {
  const std::size_t din = 3 + 6 * static_cast<std::size_t>(cfg.frequencies);
  const std::size_t h = static_cast<std::size_t>(cfg.hidden);
  std::size_t n = din * h + h;
  n += static_cast<std::size_t>(cfg.layers - 1) * (h * h + h);
  n += h + 1;
  return n;
}

void MlpField::layout() {
  if (cfg_.layers < 1 || cfg_.hidden < 1 || cfg_.frequencies < 0) {
    throw Error(Errc::InvalidArgument, "bad MLP architecture");
  }
  layers_.clear();
  std::size_t off = 0;
  int in = input_dim();
  for (int l = 0; l <= cfg_.layers; ++l) {
    const int out = l == cfg_.layers ? 1 : cfg_.hidden;
    Layer L;
    L.in = in;
    L.out = out;
    L.w = off;
    off += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    L.b = off;
    off += static_cast<std::size_t>(out);
    layers_.push_back(L);
    in = out;
  }
  if (params_.empty()) params_.assign(off, 0.0);
}

MlpField::MlpField(const MlpConfig& cfg) : cfg_(cfg) {
  layout();
  geometric_init();
}

MlpField::MlpField(const MlpConfig& cfg, std::span<const double> params) : cfg_(cfg) {
  if (params.size() != param_count_for(cfg)) {
    throw Error(Errc::ShapeMismatch, "expected " + std::to_string(param_count_for(cfg)) + " MLP parameters, got " +
                                         std::to_string(params.size()));
  }
  params_.assign(params.begin(), params.end());
  layout();
}

std::unique_ptr<SdfField> MlpField::clone() const { return std::make_unique<MlpField>(*this); }

void MlpField::geometric_init() {
  std::mt19937_64 rng(cfg_.seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    MapMat W(params_.data() + L.w, L.out, L.in);
    Eigen::Map<Eigen::VectorXd> b(params_.data() + L.b, L.out);
    if (l + 1 == layers_.size()) {
      std::normal_distribution<double> g(std::sqrt(std::numbers::pi) / std::sqrt(static_cast<double>(L.in)), 1e-4);
      for (int c = 0; c < L.in; ++c) W(0, c) = g(rng);
      b(0) = -cfg_.init_radius;
    } else {
      std::normal_distribution<double> g(0.0, std::sqrt(2.0) / std::sqrt(static_cast<double>(L.out)));
      W.setZero();
      const int cols = l == 0 ? 3 : L.in;  // encoding columns start at zero
      for (int c = 0; c < cols; ++c)
        for (int r = 0; r < L.out; ++r) W(r, c) = g(rng);
      b.setZero();
    }
  }
  // Refit the output layer by ridge regression onto the target sphere
  // distance, on samples concentrated around the surface.
  const int n = 4096;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const int din = input_dim();
  const double sb = cfg_.softplus_beta;
  Mat feat(cfg_.hidden + 1, n);
  Eigen::VectorXd target(n);
  Mat a0(din, n);
  for (int i = 0; i < n; ++i) {
    const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double r = i % 2 == 0 ? cfg_.init_radius * (1.0 + 0.2 * u(rng)) : cfg_.init_radius * 2.0 * (0.5 * u(rng) + 0.5);
    const Vec3 x = r * dir;
    target(i) = x.norm() - cfg_.init_radius;
    a0(0, i) = x.x();
    a0(1, i) = x.y();
    a0(2, i) = x.z();
    double w = 1.0;
    for (int k = 0; k < cfg_.frequencies; ++k, w *= 2.0) {
      for (int c = 0; c < 3; ++c) {
        a0(3 + 6 * k + c, i) = std::sin(w * x[c]);
        a0(6 + 6 * k + c, i) = std::cos(w * x[c]);
      }
    }
  }
  Mat act = a0;
  for (int l = 0; l < cfg_.layers; ++l) {
    const Layer& L = layers_[static_cast<std::size_t>(l)];
    CMapMat W(params_.data() + L.w, L.out, L.in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b, L.out);
    Mat z = W * act;
    z.colwise() += b;
    act = z.unaryExpr([sb](double v) { return softplus(v, sb); });
  }
  feat.topRows(cfg_.hidden) = act;
  feat.row(cfg_.hidden).setOnes();
  const Layer& O = layers_.back();
  Eigen::Map<Eigen::VectorXd> wo(params_.data() + O.w, O.in);
  Eigen::VectorXd w0(cfg_.hidden + 1);
  w0.head(cfg_.hidden) = wo;
  w0(cfg_.hidden) = params_[O.b];
  const double lambda = 1e-6 * n;
  Mat A = feat * feat.transpose();
  A.diagonal().array() += lambda;
  // Ridge toward the analytic initialization rather than toward zero.
  const Eigen::VectorXd rhs = feat * target + lambda * w0;
  const Eigen::VectorXd sol = A.ldlt().solve(rhs);
  wo = sol.head(cfg_.hidden);
  params_[O.b] = sol(cfg_.hidden);
}

std::unique_ptr<FieldTape> MlpField::forward(std::span<const Vec3> xs, bool want_grad) const {
  auto tape = std::make_unique<MlpTape>();
  const std::size_t n = xs.size();
  tape->xs.assign(xs.begin(), xs.end());
  tape->with_grad = want_grad;
  tape->values.assign(n, 0.0);
  if (want_grad) tape->grads.assign(n, Vec3::Zero());
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  tape->chunks.resize(nchunks);
  const int din = input_dim();
  const int nf = cfg_.frequencies;
  const double sb = cfg_.softplus_beta;
  const int H = cfg_.hidden;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(nchunks); ++ci) {
    MlpChunk& ch = tape->chunks[static_cast<std::size_t>(ci)];
    ch.begin = static_cast<std::size_t>(ci) * kChunk;
    ch.n = std::min(kChunk, n - ch.begin);
    const auto m = static_cast<Eigen::Index>(want_grad ? 4 * ch.n : ch.n);
    const auto cn = static_cast<Eigen::Index>(ch.n);
    ch.a0.setZero(din, m);
    for (Eigen::Index p = 0; p < cn; ++p) {
      const Vec3 x = xs[ch.begin + static_cast<std::size_t>(p)] - cfg_.center;
      for (int c = 0; c < 3; ++c) {
        ch.a0(c, p) = x[c];
        if (want_grad) ch.a0(c, (1 + c) * cn + p) = 1.0;
      }
      double w = 1.0;
      for (int k = 0; k < nf; ++k, w *= 2.0) {
        for (int c = 0; c < 3; ++c) {
          const double s = std::sin(w * x[c]);
          const double co = std::cos(w * x[c]);
          const int es = 3 + 6 * k + c;
          const int ec = es + 3;
          ch.a0(es, p) = s;
          ch.a0(ec, p) = co;
          if (want_grad) {
            ch.a0(es, (1 + c) * cn + p) = w * co;
            ch.a0(ec, (1 + c) * cn + p) = -w * s;
          }
        }
      }
    }
    ch.z.resize(static_cast<std::size_t>(cfg_.layers));
    Mat act = ch.a0;
    for (int l = 0; l < cfg_.layers; ++l) {
      const Layer& L = layers_[static_cast<std::size_t>(l)];
      CMapMat W(params_.data() + L.w, L.out, L.in);
      Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b, L.out);
      Mat& z = ch.z[static_cast<std::size_t>(l)];
      z.noalias() = W * act;
      z.leftCols(cn).colwise() += b;
      Mat value, slope;
      activate(z.leftCols(cn), sb, value, slope);
      act.resize(H, m);
      act.leftCols(cn) = value;
      if (want_grad) {
        for (int k = 1; k <= 3; ++k) {
          act.middleCols(k * cn, cn) = (slope.array() * z.middleCols(k * cn, cn).array()).matrix();
        }
      }
    }
    const Layer& O = layers_.back();
    Eigen::Map<const Eigen::RowVectorXd> wo(params_.data() + O.w, O.in);
    const Eigen::RowVectorXd out = wo * act;
    for (Eigen::Index p = 0; p < cn; ++p) {
      const std::size_t idx = ch.begin + static_cast<std::size_t>(p);
      tape->values[idx] = out(p) + params_[O.b];
      if (want_grad) tape->grads[idx] = Vec3(out(cn + p), out(2 * cn + p), out(3 * cn + p));
    }
  }
  return tape;
}

std::vector<double> MlpField::evaluate(std::span<const Vec3> xs) const {
  const std::size_t n = xs.size();
  std::vector<double> out(n);
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  const int din = input_dim();
  const double sb = cfg_.softplus_beta;
  const Layer& O = layers_.back();
  Eigen::Map<const Eigen::RowVectorXd> wo(params_.data() + O.w, O.in);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(nchunks); ++ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * kChunk;
    const auto cn = static_cast<Eigen::Index>(std::min(kChunk, n - begin));
    Mat act(din, cn);
    for (Eigen::Index p = 0; p < cn; ++p) {
      const Vec3 x = xs[begin + static_cast<std::size_t>(p)] - cfg_.center;
      act.col(p).head<3>() = x;
      double w = 1.0;
      for (int k = 0; k < cfg_.frequencies; ++k, w *= 2.0) {
        for (int c = 0; c < 3; ++c) {
          act(3 + 6 * k + c, p) = std::sin(w * x[c]);
          act(6 + 6 * k + c, p) = std::cos(w * x[c]);
        }
      }
    }
    Mat z;
    for (int l = 0; l < cfg_.layers; ++l) {
      const Layer& L = layers_[static_cast<std::size_t>(l)];
      CMapMat W(params_.data() + L.w, L.out, L.in);
      Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b, L.out);
      z.noalias() = W * act;
      z.colwise() += b;
      const Eigen::ArrayXXd t = sb * z.array();
      act = ((t.max(0.0) + (1.0 + (-t.abs()).exp()).log()) / sb).matrix();
    }
    const Eigen::RowVectorXd v = wo * act;
    for (Eigen::Index p = 0; p < cn; ++p) out[begin + static_cast<std::size_t>(p)] = v(p) + params_[O.b];
  }
  return out;
}

void MlpField::backward(FieldTape& base, std::span<const double> d_values, std::span<const Vec3> d_grads,
                        std::span<double> d_params, std::span<Vec3> d_xs) const {
  auto* tape = dynamic_cast<MlpTape*>(&base);
  if (!tape) throw Error(Errc::InvalidArgument, "tape does not belong to an MLP field");
  check_tape(base);
  const std::size_t n = tape->xs.size();
  if (d_values.size() != n || (!d_grads.empty() && d_grads.size() != n) || d_params.size() != params_.size() ||
      (!d_xs.empty() && d_xs.size() != n)) {
    throw Error(Errc::ShapeMismatch, "adjoint sizes do not match the tape");
  }
  const bool use_g = tape->with_grad && !d_grads.empty();
  const bool want_x = !d_xs.empty();
  const int nf = cfg_.frequencies;
  const double sb = cfg_.softplus_beta;
  const int H = cfg_.hidden;
  const std::size_t np = params_.size();

  // Aligned so Eigen's vectorized kernels split every map the same way on
  // each call; otherwise results vary in the last bits between runs.
  using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;
  std::vector<AlignedBuffer> buffers;
#pragma omp parallel
  {
#ifdef _OPENMP
    const int nt = omp_get_num_threads();
    const int tid = omp_get_thread_num();
#else
    const int nt = 1;
    const int tid = 0;
#endif
#pragma omp single
    buffers.assign(static_cast<std::size_t>(nt), AlignedBuffer(np, 0.0));
    AlignedBuffer& dp = buffers[static_cast<std::size_t>(tid)];

#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(tape->chunks.size()); ++ci) {
      const MlpChunk& ch = tape->chunks[static_cast<std::size_t>(ci)];
      const auto cn = static_cast<Eigen::Index>(ch.n);
      const Eigen::Index m = tape->with_grad ? 4 * cn : cn;
      const Eigen::Index mu = use_g ? m : cn;  // columns carrying adjoints

      auto activation = [&](int l) -> Mat {
        if (l < 0) return ch.a0.leftCols(mu);
        const Mat& z = ch.z[static_cast<std::size_t>(l)];
        Mat act(H, mu), value, slope;
        activate(z.leftCols(cn), sb, value, slope);
        act.leftCols(cn) = value;
        if (use_g) {
          for (int k = 1; k <= 3; ++k) {
            act.middleCols(k * cn, cn) = (slope.array() * z.middleCols(k * cn, cn).array()).matrix();
          }
        }
        return act;
      };

      // Output layer.
      const Layer& O = layers_.back();
      Eigen::Map<const Eigen::VectorXd> wo(params_.data() + O.w, O.in);
      Eigen::RowVectorXd up(mu);
      for (Eigen::Index p = 0; p < cn; ++p) {
        const std::size_t idx = ch.begin + static_cast<std::size_t>(p);
        up(p) = d_values[idx];
        if (use_g) {
          for (int k = 0; k < 3; ++k) up((k + 1) * cn + p) = d_grads[idx][k];
        }
      }
      {
        const Mat act = activation(cfg_.layers - 1);
        Eigen::Map<Eigen::VectorXd> dwo(dp.data() + O.w, O.in);
        dwo.noalias() += act * up.transpose();
        dp[O.b] += up.leftCols(cn).sum();
      }
      Mat abar = wo * up;  // H x mu

      for (int l = cfg_.layers - 1; l >= 0; --l) {
        const Layer& L = layers_[static_cast<std::size_t>(l)];
        const Mat& z = ch.z[static_cast<std::size_t>(l)];
        Mat zbar(H, mu), value, slope;
        activate(z.leftCols(cn), sb, value, slope);
        zbar.leftCols(cn) = (abar.leftCols(cn).array() * slope.array()).matrix();
        if (use_g) {
          const Eigen::ArrayXXd curv = sb * slope.array() * (1.0 - slope.array());
          for (int k = 1; k <= 3; ++k) {
            zbar.leftCols(cn).array() += abar.middleCols(k * cn, cn).array() * curv * z.middleCols(k * cn, cn).array();
            zbar.middleCols(k * cn, cn) = (abar.middleCols(k * cn, cn).array() * slope.array()).matrix();
          }
        }
        const Mat prev = activation(l - 1);
        MapMat dW(dp.data() + L.w, L.out, L.in);
        dW.noalias() += zbar * prev.transpose();
        Eigen::Map<Eigen::VectorXd> db(dp.data() + L.b, L.out);
        db += zbar.leftCols(cn).rowwise().sum();
        if (l > 0 || want_x) {
          CMapMat W(params_.data() + L.w, L.out, L.in);
          abar.noalias() = W.transpose() * zbar;
        }
      }
      if (!want_x) continue;
      // abar now holds the adjoint of the encoded input.
      for (Eigen::Index p = 0; p < cn; ++p) {
        const std::size_t idx = ch.begin + static_cast<std::size_t>(p);
        const Vec3 x = tape->xs[idx] - cfg_.center;
        Vec3 gx = Vec3::Zero();
        for (int c = 0; c < 3; ++c) gx[c] += abar(c, p);
        double w = 1.0;
        for (int k = 0; k < nf; ++k, w *= 2.0) {
          for (int c = 0; c < 3; ++c) {
            const double s = std::sin(w * x[c]);
            const double co = std::cos(w * x[c]);
            const int es = 3 + 6 * k + c;
            const int ec = es + 3;
            gx[c] += abar(es, p) * w * co - abar(ec, p) * w * s;
            if (use_g) {
              const Eigen::Index tc = (1 + c) * cn + p;
              gx[c] += -abar(es, tc) * w * w * s - abar(ec, tc) * w * w * co;
            }
          }
        }
        d_xs[idx] += gx;
      }
    }
  }
  for (const auto& buf : buffers) {
    for (std::size_t i = 0; i < np; ++i) d_params[i] += buf[i];
  }
}

// --- analytic fields ------------------------------------------------------------

namespace {

class PlainTape final : public FieldTape {
 public:
  std::vector<Vec3> xs;
};

}  // namespace

LinearField::LinearField(const Vec3& n, double c) { params_ = {n.x(), n.y(), n.z(), c}; }

std::unique_ptr<SdfField> LinearField::clone() const { return std::make_unique<LinearField>(*this); }

std::unique_ptr<FieldTape> LinearField::forward(std::span<const Vec3> xs, bool want_grad) const {
  auto t = std::make_unique<PlainTape>();
  t->xs.assign(xs.begin(), xs.end());
  const Vec3 n(params_[0], params_[1], params_[2]);
  for (const auto& x : xs) t->values.push_back(n.dot(x) + params_[3]);
  if (want_grad) t->grads.assign(xs.size(), n);
  return t;
}

void LinearField::backward(FieldTape& base, std::span<const double> d_values, std::span<const Vec3> d_grads,
                           std::span<double> d_params, std::span<Vec3> d_xs) const {
  auto& t = dynamic_cast<PlainTape&>(base);
  check_tape(base);
  const Vec3 n(params_[0], params_[1], params_[2]);
  for (std::size_t i = 0; i < t.xs.size(); ++i) {
    Vec3 dn = d_values[i] * t.xs[i];
    if (!d_grads.empty() && !t.grads.empty()) dn += d_grads[i];
    for (int k = 0; k < 3; ++k) d_params[static_cast<std::size_t>(k)] += dn[k];
    d_params[3] += d_values[i];
    if (!d_xs.empty()) d_xs[i] += d_values[i] * n;
  }
}

SphereField::SphereField(const Vec3& c, double r) { params_ = {c.x(), c.y(), c.z(), r}; }

std::unique_ptr<SdfField> SphereField::clone() const { return std::make_unique<SphereField>(*this); }

std::unique_ptr<FieldTape> SphereField::forward(std::span<const Vec3> xs, bool want_grad) const {
  auto t = std::make_unique<PlainTape>();
  t->xs.assign(xs.begin(), xs.end());
  const Vec3 c(params_[0], params_[1], params_[2]);
  for (const auto& x : xs) {
    const Vec3 d = x - c;
    t->values.push_back(d.norm() - params_[3]);
    if (want_grad) t->grads.push_back(d.norm() > 0 ? Vec3(d / d.norm()) : Vec3::Zero());
  }
  return t;
}

void SphereField::backward(FieldTape& base, std::span<const double> d_values, std::span<const Vec3> d_grads,
                           std::span<double> d_params, std::span<Vec3> d_xs) const {
  auto& t = dynamic_cast<PlainTape&>(base);
  check_tape(base);
  const Vec3 c(params_[0], params_[1], params_[2]);
  for (std::size_t i = 0; i < t.xs.size(); ++i) {
    const Vec3 d = t.xs[i] - c;
    const double r = d.norm();
    if (r == 0.0) continue;
    const Vec3 u = d / r;
    Vec3 dx = d_values[i] * u;
    if (!d_grads.empty() && !t.grads.empty()) {
      // d(u)/dx = (I - u u^T) / r
      const Vec3& gb = d_grads[i];
      dx += (gb - u * u.dot(gb)) / r;
    }
    for (int k = 0; k < 3; ++k) d_params[static_cast<std::size_t>(k)] -= dx[k];
    d_params[3] -= d_values[i];
    if (!d_xs.empty()) d_xs[i] += dx;
  }
}

// --- density and eikonal ------------------------------------------------------------

double DensityMapping::density(double f) const {
  const double b = beta();
  const double s = sigmoid(b * f);
  return b * s * (1.0 - s);
}

double DensityMapping::d_density_df(double f) const {
  const double b = beta();
  const double s = sigmoid(b * f);
  return b * b * s * (1.0 - s) * (1.0 - 2.0 * s);
}

double DensityMapping::d_density_draw(double f) const {
  const double b = beta();
  const double s = sigmoid(b * f);
  const double q = s * (1.0 - s);
  return b * (q + b * f * q * (1.0 - 2.0 * s));
}

EikonalResult eikonal_loss(std::span<const Vec3> grads) {
  if (grads.empty()) throw Error(Errc::EmptyBatch, "eikonal loss over an empty batch");
  EikonalResult r;
  const double inv = 1.0 / static_cast<double>(grads.size());
  r.d_grads.resize(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = grads[i].norm();
    r.loss += (g - 1.0) * (g - 1.0) * inv;
    r.d_grads[i] = g > 0.0 ? Vec3(2.0 * (g - 1.0) * inv * grads[i] / g) : Vec3::Zero();
  }
  return r;
}

double eikonal_loss(const SdfField& f, std::span<const Vec3> xs) {
  if (xs.empty()) throw Error(Errc::EmptyBatch, "eikonal loss over an empty batch");
  return eikonal_loss(f.forward(xs, true)->grads).loss;
}

}  // namespace sdfoam::field
