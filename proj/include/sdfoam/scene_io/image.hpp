// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sdfoam::scene_io {

/// RGB image with values in [0, 1], row-major, channel-interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  Vec3 pixel(std::size_t i) const { return {data[3 * i], data[3 * i + 1], data[3 * i + 2]}; }
  void set_pixel(std::size_t i, const Vec3& c) {
    data[3 * i] = c.x();
    data[3 * i + 1] = c.y();
    data[3 * i + 2] = c.z();
  }
};

/// Foreground mask, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

/// Decodes 8/16-bit gray, gray+alpha, RGB or RGBA PNG into RGB (alpha dropped).
Image read_png(const std::filesystem::path& path);
Image decode_png(const std::string& bytes);
/// 8-bit RGB, values clamped and rounded half up.
std::string encode_png(const Image& img);
void write_png(const Image& img, const std::filesystem::path& path);

/// A pixel is foreground when its first channel exceeds 127/255.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const Mask& m, const std::filesystem::path& path);

}  // namespace sdfoam::scene_io
