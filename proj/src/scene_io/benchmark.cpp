// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/scene_io/benchmark.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace sdfoam::scene_io {

namespace {

// +x, -x, +y, -y, +z, -z
constexpr std::array<std::array<double, 3>, 6> kHues{{
    {0.85, 0.25, 0.20},
    {0.20, 0.70, 0.30},
    {0.20, 0.35, 0.85},
    {0.90, 0.80, 0.20},
    {0.75, 0.30, 0.80},
    {0.20, 0.75, 0.80},
}};
constexpr double kCheckerDark = 0.7;
constexpr int kCheckerCells = 4;

int face_of(const Vec3& x) {
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(x[a]) > std::abs(x[axis])) axis = a;
  }
  return 2 * axis + (x[axis] < 0.0 ? 1 : 0);
}

}  // namespace

Vec3 cube_albedo(const Vec3& x) {
  const int face = face_of(x);
  const int axis = face / 2;
  const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
  auto cell = [](double u) {
    const int c = static_cast<int>(std::floor((u + kCubeHalf) / (2.0 * kCubeHalf) * kCheckerCells));
    return std::clamp(c, 0, kCheckerCells - 1);
  };
  const bool dark = ((cell(x[ua]) + cell(x[va])) & 1) != 0;
  const auto& h = kHues[static_cast<std::size_t>(face)];
  const double s = dark ? kCheckerDark : 1.0;
  return {h[0] * s, h[1] * s, h[2] * s};
}

std::optional<double> cube_hit(const render::Ray& ray) {
  double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (ray.d[a] == 0.0) {
      if (std::abs(ray.o[a]) > kCubeHalf) return std::nullopt;
      continue;
    }
    double ta = (-kCubeHalf - ray.o[a]) / ray.d[a], tb = (kCubeHalf - ray.o[a]) / ray.d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 < 0.0) return std::nullopt;
  return t0 >= 0.0 ? t0 : t1;
}

void render_cube(const render::Camera& cam, Image& img, Mask& mask) {
  img = Image(cam.width, cam.height, 1.0);
  mask.width = cam.width;
  mask.height = cam.height;
  mask.data.assign(img.pixels(), 0);
  const auto rays = render::generate_rays(cam);
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const auto t = cube_hit(rays[i]);
    if (!t) continue;
    img.set_pixel(i, cube_albedo(rays[i].o + *t * rays[i].d));
    mask.data[i] = 1;
  }
}

meshx::SurfaceMesh cube_mesh() {
  meshx::SurfaceMesh m;
  for (int k = 0; k < 8; ++k) {
    m.vertices.emplace_back(k & 1 ? kCubeHalf : -kCubeHalf, k & 2 ? kCubeHalf : -kCubeHalf,
                            k & 4 ? kCubeHalf : -kCubeHalf);
  }
  // Quads listed counter-clockwise seen from outside, in face order +x..-z.
  const std::array<std::array<int, 4>, 6> quads{{
      {1, 3, 7, 5},
      {0, 4, 6, 2},
      {2, 6, 7, 3},
      {0, 1, 5, 4},
      {4, 5, 7, 6},
      {0, 2, 3, 1},
  }};
  for (std::size_t f = 0; f < quads.size(); ++f) {
    const auto& q = quads[f];
    const auto& h = kHues[f];
    const std::array<std::uint8_t, 3> c{meshx::quantize_color(h[0]), meshx::quantize_color(h[1]),
                                        meshx::quantize_color(h[2])};
    for (const auto& tri : {std::array<int, 3>{q[0], q[1], q[2]}, std::array<int, 3>{q[0], q[2], q[3]}}) {
      m.faces.push_back({tri[0], tri[1], tri[2]});
      m.face_colors.push_back(c);
      m.face_cells.push_back(-1);
    }
  }
  return m;
}

std::vector<render::Camera> cube_cameras(const CubeBenchmarkOptions& opt, std::vector<int>* test_ids) {
  if (opt.n_train < 2 || opt.n_test < 0) throw Error(Errc::InvalidArgument, "need at least two training cameras");
  const double phase = static_cast<double>(opt.seed % 360) * std::numbers::pi / 180.0;
  render::Camera base;
  base.width = base.height = opt.resolution;
  base.fx = base.fy = 1.2 * opt.resolution;
  base.cx = base.cy = 0.5 * opt.resolution;
  std::vector<render::Camera> cams;
  auto ring = [&](int n, double z, double offset) {
    for (int k = 0; k < n; ++k) {
      const double th = phase + offset + 2.0 * std::numbers::pi * k / n;
      const Vec3 eye(kRingRadius * std::cos(th), kRingRadius * std::sin(th), z);
      render::Camera c = base;
      c.c2w = render::look_at(eye, Vec3::Zero(), Vec3::UnitZ());
      cams.push_back(c);
    }
  };
  const int upper = (opt.n_train + 1) / 2;
  ring(upper, kRingHeight, 0.0);
  ring(opt.n_train - upper, -kRingHeight, std::numbers::pi / upper);
  const int tu = (opt.n_test + 1) / 2;
  if (test_ids) test_ids->clear();
  for (int k = 0; k < opt.n_test; ++k) {
    if (test_ids) test_ids->push_back(opt.n_train + k);
  }
  if (tu > 0) ring(tu, 0.5 * kRingHeight, std::numbers::pi / tu + 0.5 * std::numbers::pi / upper);
  if (opt.n_test - tu > 0) ring(opt.n_test - tu, -0.5 * kRingHeight, 0.5 * std::numbers::pi / upper);
  return cams;
}

Dataset make_cube_benchmark(const std::filesystem::path& out, const CubeBenchmarkOptions& opt) {
  if (opt.resolution < 32) throw Error(Errc::InvalidArgument, "resolution must be at least 32");
  std::error_code ec;
  std::filesystem::create_directories(out / "images", ec);
  std::filesystem::create_directories(out / "masks", ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out.string() + ": " + ec.message());

  Dataset d;
  d.root = out;
  std::vector<int> test_ids;
  d.cameras = cube_cameras(opt, &test_ids);
  for (std::size_t k = 0; k < d.cameras.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "r_%03zu.png", k);
    const bool test = static_cast<int>(k) >= opt.n_train;
    d.image_paths.push_back(std::string("images/") + name);
    d.mask_paths.push_back(std::string("masks/") + name);
    d.splits.push_back(test ? "test" : "train");
    (test ? d.test_ids : d.train_ids).push_back(static_cast<int>(k));
    Image img;
    Mask mask;
    render_cube(d.cameras[k], img, mask);
    write_png(img, out / d.image_paths.back());
    write_mask(mask, out / *d.mask_paths.back());
  }
  meshx::write_ply(cube_mesh(), out / kGtMeshName);
  write_dataset(d, out);
  return d;
}

}  // namespace sdfoam::scene_io
