#include <doctest.h>

#include "sdfoam/field/field.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace sdfoam;
using namespace sdfoam::field;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double s = 0.8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-s, s);
  std::vector<Vec3> p(n);
  for (auto& x : p) x = Vec3(u(rng), u(rng), u(rng));
  return p;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Scalar objective used for finite differences: sum_i w_i f(x_i) + sum_i v_i . grad f(x_i).
double objective(const SdfField& f, std::span<const Vec3> xs, const std::vector<double>& w,
                 const std::vector<Vec3>& v) {
  auto t = f.forward(xs, true);
  double s = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += w[i] * t->values[i] + v[i].dot(t->grads[i]);
  return s;
}

}  // namespace

TEST_CASE("sphere initialization") {
  MlpField f;
  CHECK(f.param_count() == MlpField::param_count_for({}));
  CHECK(f.input_dim() == 39);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<Vec3> on;
  for (int i = 0; i < 500; ++i) on.push_back(0.5 * Vec3(g(rng), g(rng), g(rng)).normalized());
  double worst = 0;
  for (double v : sdf_eval(f, on)) worst = std::max(worst, std::abs(v));
  CHECK(worst < 0.05);
  // Inside negative, outside positive.
  const std::vector<Vec3> probe{Vec3::Zero(), Vec3(1.2, 0, 0)};
  const auto v = sdf_eval(f, probe);
  CHECK(v[0] < 0);
  CHECK(v[1] > 0);
}

TEST_CASE("forward is deterministic") {
  MlpField f;
  const auto xs = random_points(300, 1);
  const auto a = f.forward(xs, true);
  const auto b = f.forward(xs, true);
  CHECK(a->values == b->values);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(a->grads[i] == b->grads[i]);
  // Values agree with and without the gradient streams.
  CHECK(sdf_eval(f, xs) == a->values);
}

TEST_CASE("backward is reproducible across tapes") {
  MlpConfig cfg;
  cfg.hidden = 16;
  cfg.layers = 2;
  MlpField f(cfg);
  const auto xs = random_points(300, 2);
  const std::vector<double> dv(xs.size(), 0.3);
  std::vector<Vec3> dg(xs.size(), Vec3(0.1, -0.2, 0.05));
  std::vector<double> p1(f.param_count()), p2(f.param_count());
  std::vector<Vec3> x1(xs.size(), Vec3::Zero()), x2(xs.size(), Vec3::Zero());
  auto t1 = f.forward(xs, true);
  f.backward(*t1, dv, dg, p1, x1);
  auto t2 = f.forward(xs, true);
  f.backward(*t2, dv, dg, p2, x2);
  CHECK(p1 == p2);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(x1[i] == x2[i]);
}

TEST_CASE("spatial gradient matches finite differences") {
  MlpConfig cfg;
  cfg.seed = 4;
  MlpField f(cfg);
  const auto xs = random_points(100, 9);
  const auto g = sdf_grad(f, xs);
  std::vector<double> an, fd;
  const double h = 1e-6;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      std::vector<Vec3> p{xs[i]}, m{xs[i]};
      p[0][k] += h;
      m[0][k] -= h;
      fd.push_back((sdf_eval(f, p)[0] - sdf_eval(f, m)[0]) / (2 * h));
      an.push_back(g[i][k]);
    }
  }
  CHECK(rel_err(an, fd) < 1e-5);
}

TEST_CASE("analytic gradients of test doubles") {
  LinearField lin(Vec3(0.3, -0.4, 1.2), 0.5);
  for (const auto& g : sdf_grad(lin, random_points(10, 3))) CHECK((g - Vec3(0.3, -0.4, 1.2)).norm() == 0.0);
  SphereField sph(Vec3::Zero(), 0.5);
  const auto xs = random_points(10, 5);
  const auto gs = sdf_grad(sph, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK((gs[i] - xs[i].normalized()).norm() < 1e-15);
}

TEST_CASE("parameter and position gradients through values and spatial gradients") {
  MlpConfig cfg;
  cfg.seed = 8;
  MlpField f(cfg);
  const auto xs = random_points(40, 12);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> w(xs.size());
  std::vector<Vec3> v(xs.size());
  for (auto& x : w) x = g(rng);
  for (auto& x : v) x = Vec3(g(rng), g(rng), g(rng));

  auto tape = f.forward(xs, true);
  std::vector<double> dp(f.param_count(), 0.0);
  std::vector<Vec3> dx(xs.size(), Vec3::Zero());
  f.backward(*tape, w, v, dp, dx);

  std::uniform_int_distribution<std::size_t> pick(0, f.param_count() - 1);
  std::vector<double> an, fd;
  const double h = 1e-6;
  for (int s = 0; s < 80; ++s) {
    const std::size_t k = s < 10 ? f.param_count() - 1 - static_cast<std::size_t>(s) : pick(rng);
    MlpField fp = f, fm = f;
    fp.params()[k] += h;
    fm.params()[k] -= h;
    fd.push_back((objective(fp, xs, w, v) - objective(fm, xs, w, v)) / (2 * h));
    an.push_back(dp[k]);
  }
  CHECK(rel_err(an, fd) < 1e-5);

  an.clear();
  fd.clear();
  for (std::size_t i = 0; i < 10; ++i) {
    for (int k = 0; k < 3; ++k) {
      auto xp = xs, xm = xs;
      xp[i][k] += h;
      xm[i][k] -= h;
      fd.push_back((objective(f, xp, w, v) - objective(f, xm, w, v)) / (2 * h));
      an.push_back(dx[i][k]);
    }
  }
  CHECK(rel_err(an, fd) < 1e-5);
}

TEST_CASE("sphere double gradients") {
  SphereField f(Vec3(0.1, 0.2, -0.1), 0.4);
  const auto xs = random_points(5, 2);
  std::vector<double> w{0.3, -1, 2, 0.5, 1};
  std::vector<Vec3> v(5, Vec3(0.2, -0.7, 0.4));
  auto tape = f.forward(xs, true);
  std::vector<double> dp(4, 0.0);
  std::vector<Vec3> dx(5, Vec3::Zero());
  f.backward(*tape, w, v, dp, dx);
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    SphereField fp = f, fm = f;
    fp.params()[static_cast<std::size_t>(k)] += h;
    fm.params()[static_cast<std::size_t>(k)] -= h;
    CHECK(dp[static_cast<std::size_t>(k)] == doctest::Approx((objective(fp, xs, w, v) - objective(fm, xs, w, v)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("tape is single use") {
  MlpField f;
  const auto xs = random_points(3, 1);
  auto t = f.forward(xs, false);
  std::vector<double> dv(3, 1.0), dp(f.param_count());
  f.backward(*t, dv, {}, dp, {});
  try {
    f.backward(*t, dv, {}, dp, {});
    FAIL("expected TapeConsumed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TapeConsumed);
  }
}

TEST_CASE("density mapping") {
  DensityMapping m;
  CHECK(m.beta() == doctest::Approx(10.0));
  m.raw_beta = std::log(4.0);
  CHECK(m.density(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  m.raw_beta = 0.0;
  CHECK(m.density(std::log(3.0)) == doctest::Approx(0.1875).epsilon(1e-14));
  CHECK(m.density(1e6) == 0.0);
  CHECK(m.density(-1e6) == 0.0);
  for (double beta : {0.5, 1.0, 10.0, 100.0}) {
    m.raw_beta = std::log(beta);
    CHECK(std::abs(m.density(0.0) - beta / 4) <= 1e-15 * beta);
    for (double f : {0.01, 0.3, 2.0}) {
      CHECK(std::abs(m.density(f) - m.density(-f)) < 1e-12);
      CHECK(m.density(f) < m.density(0.0));
    }
    const double h = 1e-6;
    for (double f : {-0.2, 0.03, 0.5}) {
      const double fd_f = (m.density(f + h) - m.density(f - h)) / (2 * h);
      CHECK(m.d_density_df(f) == doctest::Approx(fd_f).epsilon(1e-5));
      DensityMapping p = m, q = m;
      p.raw_beta += h;
      q.raw_beta -= h;
      const double fd_b = (p.density(f) - q.density(f)) / (2 * h);
      CHECK(m.d_density_draw(f) == doctest::Approx(fd_b).epsilon(1e-5));
    }
  }
}

TEST_CASE("eikonal loss") {
  LinearField unit(Vec3(0, 0.6, 0.8), 0.1);
  const auto xs = random_points(50, 1);
  CHECK(eikonal_loss(unit, xs) < 1e-12);
  LinearField two(Vec3(2, 0, 0), 0.0);
  CHECK(eikonal_loss(two, xs) == doctest::Approx(1.0));
  LinearField flat(Vec3::Zero(), 3.0);
  CHECK(eikonal_loss(flat, xs) == doctest::Approx(1.0));
  try {
    eikonal_loss(unit, std::span<const Vec3>{});
    FAIL("expected EmptyBatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyBatch);
  }
}
