// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/geometry/delaunay.hpp"
#include "sdfoam/render/camera.hpp"
#include "sdfoam/render/scene.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sdfoam::scene_io {

inline constexpr const char* kSnapshotVersion = "SDFOAM-1";

/// Persisted scene plus per-site caches and the cameras it was trained with.
struct Snapshot {
  render::Scene scene;
  std::vector<render::Camera> cameras;
  std::vector<double> sdf;    // f(p_i)
  std::vector<double> alpha;  // canonical per-cell opacity

  Snapshot() = default;
  Snapshot(const Snapshot&) = default;
  Snapshot& operator=(const Snapshot&) = default;
  Snapshot(Snapshot&&) noexcept = default;
  Snapshot& operator=(Snapshot&&) noexcept = default;
};

/// alpha_i = 1 - exp(-rho_i * r_i), r_i the mean distance to Delaunay neighbors.
std::vector<double> canonical_alpha(const geometry::DelaunayMesh& mesh, std::span<const double> rho);

/// Recomputes the sdf/alpha caches from the scene.
void refresh_cache(Snapshot& snap);
Snapshot make_snapshot(render::Scene scene, std::vector<render::Camera> cameras = {});

/// Container layout: the 8-byte tag "SDFOAM-1", a little-endian u64 header
/// length, the JSON header, then raw little-endian f64 sections whose byte
/// offsets (relative to the end of the header), counts and CRC-32 values are
/// declared in the header.
std::string encode_snapshot(const Snapshot& snap);
void save_snapshot(const Snapshot& snap, const std::filesystem::path& path);
/// Throws VersionMismatch on a wrong tag/version and CorruptSection on a
/// truncated file, a malformed header or a checksum mismatch.
Snapshot decode_snapshot(const std::string& bytes);
Snapshot load_snapshot(const std::filesystem::path& path);

}  // namespace sdfoam::scene_io
