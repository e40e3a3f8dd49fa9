// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/eval/metrics.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sdfoam::eval {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;

namespace {

void check_shapes(const scene_io::Image& a, const scene_io::Image& b, const scene_io::Mask* mask) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
    throw Error(Errc::ShapeMismatch, "images differ in size");
  }
  if (mask && (mask->width != a.width || mask->height != a.height || mask->data.size() != a.pixels())) {
    throw Error(Errc::ShapeMismatch, "mask differs in size");
  }
}

std::vector<double> gaussian_window() {
  std::vector<double> w(11);
  for (int k = 0; k < 11; ++k) w[static_cast<std::size_t>(k)] = std::exp(-(k - 5) * (k - 5) / (2.0 * 1.5 * 1.5));
  return w;
}

// Normalized separable Gaussian blur of a single-channel plane.
std::vector<double> blur(const std::vector<double>& src, int w, int h, const std::vector<double>& win) {
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0, ws = 0.0;
      for (int k = -5; k <= 5; ++k) {
        const int xx = x + k;
        if (xx < 0 || xx >= w) continue;
        const double wk = win[static_cast<std::size_t>(k + 5)];
        s += wk * src[static_cast<std::size_t>(y) * w + xx];
        ws += wk;
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s / ws;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0, ws = 0.0;
      for (int k = -5; k <= 5; ++k) {
        const int yy = y + k;
        if (yy < 0 || yy >= h) continue;
        const double wk = win[static_cast<std::size_t>(k + 5)];
        s += wk * tmp[static_cast<std::size_t>(yy) * w + x];
        ws += wk;
      }
      out[static_cast<std::size_t>(y) * w + x] = s / ws;
    }
  }
  return out;
}

}  // namespace

double psnr(const scene_io::Image& a, const scene_io::Image& b, const scene_io::Mask* mask) {
  check_shapes(a, b, mask);
  double se = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    if (mask && !mask->data[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = a.data[3 * i + c] - b.data[3 * i + c];
      se += d * d;
    }
    count += 3;
  }
  if (count == 0) throw Error(Errc::InvalidArgument, "mask selects no pixels");
  const double mse = se / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const scene_io::Image& a, const scene_io::Image& b, const scene_io::Mask* mask) {
  check_shapes(a, b, mask);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int w = a.width, h = a.height;
  const auto win = gaussian_window();
  const std::size_t n = a.pixels();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = a.data[3 * i + c];
      pb[i] = b.data[3 * i + c];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto ma = blur(pa, w, h, win), mb = blur(pb, w, h, win);
    const auto saa = blur(paa, w, h, win), sbb = blur(pbb, w, h, win), sab = blur(pab, w, h, win);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask && !mask->data[i]) continue;
      const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
      total += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
               ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
      ++count;
    }
  }
  if (count == 0) throw Error(Errc::InvalidArgument, "mask selects no pixels");
  return total / static_cast<double>(count);
}

std::vector<Vec3> sample_surface(const meshx::SurfaceMesh& m, std::size_t n, std::uint64_t seed) {
  if (m.empty()) throw Error(Errc::EmptyMesh, "cannot sample an empty mesh");
  const auto tri = meshx::triangulate(m);
  std::vector<double> cdf(tri.faces.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < tri.faces.size(); ++f) {
    acc += meshx::polygon_area(tri, f);
    cdf[f] = acc;
  }
  if (!(acc > 0.0)) throw Error(Errc::EmptyMesh, "mesh has zero area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = u(rng) * acc;
    const auto f = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    const auto& t = tri.faces[std::min(f, cdf.size() - 1)];
    const double s = std::sqrt(u(rng)), v = u(rng);
    const Vec3& p0 = tri.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& p1 = tri.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& p2 = tri.vertices[static_cast<std::size_t>(t[2])];
    out.push_back((1.0 - s) * p0 + s * (1.0 - v) * p1 + s * v * p2);
  }
  return out;
}

double mean_nearest_distance(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.empty() || to.empty()) throw Error(Errc::EmptyMesh, "empty point set");
  std::vector<BPoint> pts;
  pts.reserve(to.size());
  for (const auto& p : to) pts.emplace_back(p.x(), p.y(), p.z());
  const bgi::rtree<BPoint, bgi::quadratic<16>> tree(pts.begin(), pts.end());
  double sum = 0.0;
  std::vector<BPoint> hit;
  for (const auto& p : from) {
    hit.clear();
    tree.query(bgi::nearest(BPoint(p.x(), p.y(), p.z()), 1), std::back_inserter(hit));
    const Vec3 q(bg::get<0>(hit[0]), bg::get<1>(hit[0]), bg::get<2>(hit[0]));
    sum += (p - q).norm();
  }
  return sum / static_cast<double>(from.size());
}

double chamfer(const meshx::SurfaceMesh& a, const meshx::SurfaceMesh& b, std::size_t n_samples, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptyMesh, "chamfer needs two non-empty meshes");
  if (n_samples == 0) throw Error(Errc::InvalidArgument, "n_samples must be positive");
  const auto pa = sample_surface(a, n_samples, seed);
  const auto pb = sample_surface(b, n_samples, seed);
  return 0.5 * (mean_nearest_distance(pa, pb) + mean_nearest_distance(pb, pa));
}

}  // namespace sdfoam::eval
