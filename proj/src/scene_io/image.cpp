// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/scene_io/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sdfoam::scene_io {

namespace {

struct ReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, cur->bytes->data() + cur->pos, n);
  cur->pos += n;
}

void write_fn(png_structp png, png_bytep in, png_size_t n) {
  static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(in), n);
}

void flush_fn(png_structp) {}

[[noreturn]] void error_fn(png_structp, png_const_charp msg) { throw Error(Errc::IoError, msg); }
void warn_fn(png_structp, png_const_charp) {}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::MissingFile, path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Decodes to 8-bit RGB rows.
std::vector<std::uint8_t> decode_rgb8(const std::string& bytes, int& w, int& h) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw Error(Errc::IoError, "not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_fn, warn_fn);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  try {
    ReadCursor cur{&bytes, 0};
    png_set_read_fn(png, &cur, read_fn);
    png_read_info(png, info);
    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<std::size_t>(w) * 3) throw Error(Errc::IoError, "unexpected PNG row layout");
    out.resize(stride * static_cast<std::size_t>(h));
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = out.data() + stride * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::string encode_rgb8(const std::vector<std::uint8_t>& rgb, int w, int h) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_fn, warn_fn);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, write_fn, flush_fn);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
      png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w) * 3);
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void dump(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5)); }

}  // namespace

Image decode_png(const std::string& bytes) {
  int w = 0, h = 0;
  const auto rgb = decode_rgb8(bytes, w, h);
  Image img(w, h);
  for (std::size_t k = 0; k < rgb.size(); ++k) img.data[k] = rgb[k] / 255.0;
  return img;
}

Image read_png(const std::filesystem::path& path) { return decode_png(slurp(path)); }

std::string encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0 || img.data.size() != img.pixels() * 3) {
    throw Error(Errc::ShapeMismatch, "image buffer does not match its size");
  }
  std::vector<std::uint8_t> rgb(img.data.size());
  std::transform(img.data.begin(), img.data.end(), rgb.begin(), to_byte);
  return encode_rgb8(rgb, img.width, img.height);
}

void write_png(const Image& img, const std::filesystem::path& path) { dump(encode_png(img), path); }

Mask read_mask(const std::filesystem::path& path) {
  Mask m;
  const auto rgb = decode_rgb8(slurp(path), m.width, m.height);
  m.data.resize(static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height));
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = rgb[3 * i] > 127 ? 1 : 0;
  return m;
}

void write_mask(const Mask& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> rgb(m.data.size() * 3);
  for (std::size_t i = 0; i < m.data.size(); ++i) rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = m.data[i] ? 255 : 0;
  dump(encode_rgb8(rgb, m.width, m.height), path);
}

}  // namespace sdfoam::scene_io
