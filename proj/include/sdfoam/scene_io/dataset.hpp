// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/render/camera.hpp"
#include "sdfoam/scene_io/image.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdfoam::scene_io {

inline constexpr const char* kManifestName = "transforms.json";

/// Calibrated views. The manifest lives at root/transforms.json; image and
/// mask paths are relative to root.
///
/// Manifest keys: w, h, fl_x, fl_y, cx, cy and frames[] with file_path,
/// transform_matrix (4x4 row-major world-from-camera, OpenGL axes) and the
/// optional mask_path and split ("train" or "test"). Without any split key
/// every tenth frame is held out for testing.
struct Dataset {
  std::filesystem::path root;
  std::vector<render::Camera> cameras;
  std::vector<std::string> image_paths;
  std::vector<std::optional<std::string>> mask_paths;
  std::vector<std::string> splits;  // "train" / "test" per frame; empty when unspecified
  std::vector<int> train_ids;
  std::vector<int> test_ids;

  std::size_t size() const { return cameras.size(); }
  bool has_masks() const;

  /// Throws MissingFile / ResolutionMismatch.
  Image load_image(int k) const;
  std::optional<Mask> load_mask(int k) const;
};

/// Parses and validates the manifest. Images are checked for existence and
/// resolution. Throws MissingFile, BadManifest (naming the key) or
/// ResolutionMismatch.
Dataset load_dataset(const std::filesystem::path& root);

/// Canonical manifest text: sorted keys, two-space indent, shortest
/// round-trip doubles.
std::string manifest_json(const Dataset& d);

/// Writes manifest_json(d) to dir/transforms.json (images are not copied).
void write_dataset(const Dataset& d, const std::filesystem::path& dir);

}  // namespace sdfoam::scene_io
