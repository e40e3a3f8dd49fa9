// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdfoam/render/view.hpp"
#include "sdfoam/scene_io/snapshot.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace httplib {
class Server;
}

namespace sdfoam::service {

struct Reply {
  int status = 200;
  std::string content_type;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Read-only HTTP front end over one snapshot.
///
///   GET  /scene           JSON {version, n_sites, n_cameras, beta, bbox, step}
///   GET  /sites           binary site table (see encode_sites)
///   POST /extract         JSON {mode, thresholds} -> PLY; 400 bad params, 422 empty
///   GET  /render?cam=K    PNG of snapshot camera K
///   POST /render          JSON {pose: 4x4 row-major, intrinsics: {w, h, fx, fy, cx, cy}} -> PNG
///
/// Responses carry CORS headers for http://localhost and http://127.0.0.1
/// origins.
class SceneService {
 public:
  explicit SceneService(scene_io::Snapshot snap);

  Reply scene() const;
  Reply sites() const;
  Reply extract(const std::string& body) const;
  Reply render_camera(const std::string& cam) const;
  Reply render_pose(const std::string& body) const;

  /// Registers all routes on `server`.
  void mount(httplib::Server& server) const;

  const scene_io::Snapshot& snapshot() const { return snap_; }

 private:
  scene_io::Snapshot snap_;
  render::PreparedScene prep_;

  Reply render_with(const render::Camera& cam) const;
};

/// Site table: "SDFSITES", u32 version 1, u32 n, then positions f32[3n],
/// colors u8[3n] (round half up), zero padding to a 4-byte boundary,
/// sdf f32[n], alpha f32[n]; all little-endian.
std::string encode_sites(const scene_io::Snapshot& snap);

/// Blocks serving on bind:port.
void serve(const scene_io::Snapshot& snap, const std::string& bind, int port);

}  // namespace sdfoam::service
