// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/scene_io/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sdfoam::scene_io {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(Errc::BadManifest, "missing key '" + std::string(key) + "' in " + where);
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_number()) throw Error(Errc::BadManifest, "key '" + std::string(key) + "' in " + where + " is not a number");
  return v.get<double>();
}

std::string text(const json& j, const char* key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_string()) throw Error(Errc::BadManifest, "key '" + std::string(key) + "' in " + where + " is not a string");
  return v.get<std::string>();
}

}  // namespace

bool Dataset::has_masks() const {
  return !mask_paths.empty() && std::all_of(mask_paths.begin(), mask_paths.end(), [](const auto& m) { return m.has_value(); });
}

Image Dataset::load_image(int k) const {
  const auto& cam = cameras.at(static_cast<std::size_t>(k));
  Image img = read_png(root / image_paths[static_cast<std::size_t>(k)]);
  if (img.width != cam.width || img.height != cam.height) {
    throw Error(Errc::ResolutionMismatch, image_paths[static_cast<std::size_t>(k)] + " is " + std::to_string(img.width) +
                                              "x" + std::to_string(img.height));
  }
  return img;
}

std::optional<Mask> Dataset::load_mask(int k) const {
  const auto& p = mask_paths.at(static_cast<std::size_t>(k));
  if (!p) return std::nullopt;
  Mask m = read_mask(root / *p);
  const auto& cam = cameras[static_cast<std::size_t>(k)];
  if (m.width != cam.width || m.height != cam.height) throw Error(Errc::ResolutionMismatch, *p);
  return m;
}

Dataset load_dataset(const std::filesystem::path& root) {
  const auto manifest = root / kManifestName;
  std::ifstream f(manifest);
  if (!f) throw Error(Errc::MissingFile, manifest.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(Errc::BadManifest, e.what());
  }
  const std::string top = "manifest";
  const double w = number(j, "w", top), h = number(j, "h", top);
  const double fx = number(j, "fl_x", top), fy = number(j, "fl_y", top);
  const double cx = number(j, "cx", top), cy = number(j, "cy", top);
  const auto& frames = require(j, "frames", top);
  if (!frames.is_array() || frames.empty()) throw Error(Errc::BadManifest, "'frames' must be a non-empty array");

  Dataset d;
  d.root = root;
  bool any_split = false;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& fr = frames[k];
    const std::string where = "frames[" + std::to_string(k) + "]";
    render::Camera cam;
    cam.width = static_cast<int>(w);
    cam.height = static_cast<int>(h);
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    const auto& m = require(fr, "transform_matrix", where);
    if (!m.is_array() || m.size() != 4) throw Error(Errc::BadManifest, where + ".transform_matrix must be 4x4");
    for (int r = 0; r < 4; ++r) {
      if (!m[r].is_array() || m[r].size() != 4) throw Error(Errc::BadManifest, where + ".transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) cam.c2w(r, c) = m[r][c].get<double>();
    }
    try {
      cam.validate();
    } catch (const Error& e) {
      throw Error(Errc::BadManifest, where + ": " + e.what());
    }
    d.cameras.push_back(cam);
    d.image_paths.push_back(text(fr, "file_path", where));
    d.mask_paths.push_back(fr.contains("mask_path") ? std::optional(text(fr, "mask_path", where)) : std::nullopt);
    if (fr.contains("split")) {
      const auto s = text(fr, "split", where);
      if (s != "train" && s != "test") throw Error(Errc::BadManifest, where + ".split must be 'train' or 'test'");
      d.splits.push_back(s);
      any_split = true;
    } else {
      d.splits.emplace_back();
    }
  }
  for (int k = 0; k < static_cast<int>(d.size()); ++k) {
    const bool test = any_split ? d.splits[static_cast<std::size_t>(k)] == "test" : (d.size() >= 10 && k % 10 == 9);
    (test ? d.test_ids : d.train_ids).push_back(k);
  }
  if (!any_split) d.splits.clear();
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (!std::filesystem::exists(root / d.image_paths[k])) throw Error(Errc::MissingFile, (root / d.image_paths[k]).string());
    if (d.mask_paths[k] && !std::filesystem::exists(root / *d.mask_paths[k])) {
      throw Error(Errc::MissingFile, (root / *d.mask_paths[k]).string());
    }
  }
  return d;
}

std::string manifest_json(const Dataset& d) {
  if (d.cameras.empty()) throw Error(Errc::InvalidArgument, "dataset has no cameras");
  const auto& c0 = d.cameras.front();
  json j;
  j["w"] = c0.width;
  j["h"] = c0.height;
  j["fl_x"] = c0.fx;
  j["fl_y"] = c0.fy;
  j["cx"] = c0.cx;
  j["cy"] = c0.cy;
  json frames = json::array();
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto& cam = d.cameras[k];
    if (cam.width != c0.width || cam.height != c0.height || cam.fx != c0.fx || cam.fy != c0.fy || cam.cx != c0.cx ||
        cam.cy != c0.cy) {
      throw Error(Errc::InvalidArgument, "manifest requires shared intrinsics");
    }
    json fr;
    fr["file_path"] = d.image_paths[k];
    json m = json::array();
    for (int r = 0; r < 4; ++r) m.push_back({cam.c2w(r, 0), cam.c2w(r, 1), cam.c2w(r, 2), cam.c2w(r, 3)});
    fr["transform_matrix"] = m;
    if (k < d.mask_paths.size() && d.mask_paths[k]) fr["mask_path"] = *d.mask_paths[k];
    if (k < d.splits.size() && !d.splits[k].empty()) fr["split"] = d.splits[k];
    frames.push_back(fr);
  }
  j["frames"] = frames;
  return j.dump(2) + "\n";
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / kManifestName;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string());
  f << manifest_json(d);
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace sdfoam::scene_io
