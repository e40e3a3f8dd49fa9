// Small analytic scenes and scratch directories shared by the unit tests.
#pragma once

#include "sdfoam/field/field.hpp"
#include "sdfoam/scene_io/snapshot.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace sdfoam::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sdfoam_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// k^3 sites on a regular grid with spacing h, symmetric about the origin.
inline std::vector<Vec3> grid_points(int k, double h) {
  std::vector<Vec3> out;
  const double off = 0.5 * (k - 1) * h;
  for (int x = 0; x < k; ++x) {
    for (int y = 0; y < k; ++y) {
      for (int z = 0; z < k; ++z) out.emplace_back(x * h - off, y * h - off, z * h - off);
    }
  }
  return out;
}

inline std::vector<Vec3> jittered_points(std::size_t n, double half, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

/// Snapshot over `points` with the given field; colors encode the site index.
inline scene_io::Snapshot analytic_snapshot(const std::vector<Vec3>& points, std::unique_ptr<field::SdfField> f,
                                            double beta = 100.0) {
  render::Scene s;
  const std::vector<double> sh(render::kShStride, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double t = static_cast<double>(i % 97) / 96.0;
    s.sites.push_back(points[i], Vec3(t, 1.0 - t, 0.5), sh);
  }
  s.field = std::move(f);
  s.mapping.raw_beta = std::log(beta);
  return scene_io::make_snapshot(std::move(s));
}

}  // namespace sdfoam::testing
