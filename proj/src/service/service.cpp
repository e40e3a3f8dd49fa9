// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/service/service.hpp"

#include "sdfoam/meshx/extract.hpp"
#include "sdfoam/scene_io/image.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>

namespace sdfoam::service {

using nlohmann::json;

namespace {

Reply error_reply(int status, const std::string& msg) {
  return {status, "application/json", json{{"error", msg}}.dump(), {}};
}

template <typename T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw Error(Errc::InvalidArgument, std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

meshx::ExtractRequest parse_extract(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "body must be a JSON object");
  meshx::ExtractRequest req;
  req.mode = meshx::parse_mode(j.value("mode", std::string("sdf")));
  req.sdf_options.cell_tau = number_or(j, "cell_tau", meshx::kDefaultCellTau);
  req.sdf_options.vert_eps = number_or(j, "vert_eps", meshx::kDefaultVertEps);
  if (j.contains("signed")) req.sdf_options.signed_vertices = j.at("signed").get<bool>();
  req.sdf_range = {number_or(j, "sdf_min", req.sdf_range.min), number_or(j, "sdf_max", req.sdf_range.max)};
  req.alpha_range = {number_or(j, "alpha_min", req.alpha_range.min), number_or(j, "alpha_max", req.alpha_range.max)};
  req.rho_tau = number_or(j, "rho_tau", 0.0);
  if (req.mode == meshx::ExtractMode::Sdf &&
      !(req.sdf_options.vert_eps > 0.0 && req.sdf_options.cell_tau > req.sdf_options.vert_eps)) {
    throw Error(Errc::InvalidArgument, "need cell_tau > vert_eps > 0");
  }
  if (req.mode == meshx::ExtractMode::Retained &&
      (req.sdf_range.min > req.sdf_range.max || req.alpha_range.min > req.alpha_range.max)) {
    throw Error(Errc::InvalidArgument, "range has min > max");
  }
  if (req.mode == meshx::ExtractMode::Density && !(req.rho_tau > 0.0)) {
    throw Error(Errc::InvalidArgument, "rho_tau must be positive");
  }
  return req;
}

bool local_origin(const std::string& origin) {
  for (const char* p : {"http://localhost", "http://127.0.0.1"}) {
    const std::size_t n = std::strlen(p);
    if (origin.compare(0, n, p) == 0 && (origin.size() == n || origin[n] == ':')) return true;
  }
  return false;
}

}  // namespace

std::string encode_sites(const scene_io::Snapshot& snap) {
  const auto& s = snap.scene.sites;
  const auto n = static_cast<std::uint32_t>(s.size());
  std::string out("SDFSITES");
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, n);
  for (const auto& p : s.positions) {
    for (int c = 0; c < 3; ++c) put(out, static_cast<float>(p[c]));
  }
  for (const auto& c : s.colors) {
    for (int k = 0; k < 3; ++k) put(out, meshx::quantize_color(c[k]));
  }
  out.append((4 - (3 * static_cast<std::size_t>(n)) % 4) % 4, '\0');
  for (double v : snap.sdf) put(out, static_cast<float>(v));
  for (double v : snap.alpha) put(out, static_cast<float>(v));
  return out;
}

SceneService::SceneService(scene_io::Snapshot snap) : snap_(std::move(snap)), prep_(render::prepare(snap_.scene)) {}

Reply SceneService::scene() const {
  const auto& pos = snap_.scene.sites.positions;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  if (!pos.empty()) {
    lo = hi = pos.front();
    for (const auto& p : pos) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  json j;
  j["version"] = scene_io::kSnapshotVersion;
  j["n_sites"] = pos.size();
  j["n_cameras"] = snap_.cameras.size();
  j["beta"] = snap_.scene.mapping.beta();
  j["bbox"] = {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}};
  j["step"] = snap_.scene.step;
  return {200, "application/json", j.dump(), {}};
}

Reply SceneService::sites() const { return {200, "application/octet-stream", encode_sites(snap_), {}}; }

Reply SceneService::extract(const std::string& body) const {
  meshx::ExtractRequest req;
  try {
    req = parse_extract(json::parse(body.empty() ? std::string("{}") : body));
  } catch (const json::exception& e) {
    return error_reply(400, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  try {
    const auto mesh = meshx::run_extraction(snap_, req);
    Reply r{200, "application/ply", meshx::encode_ply(mesh), {}};
    r.headers["X-Face-Count"] = std::to_string(mesh.face_count());
    if (req.mode == meshx::ExtractMode::Retained) {
      const auto keep = meshx::retained_sites(snap_, req.sdf_range, req.alpha_range);
      r.headers["X-Retained-Count"] = std::to_string(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
    }
    return r;
  } catch (const Error& e) {
    if (e.code() == Errc::EmptyResult) return error_reply(422, e.what());
    if (e.code() == Errc::InvalidArgument) return error_reply(400, e.what());
    return error_reply(500, e.what());
  }
}

Reply SceneService::render_with(const render::Camera& cam) const {
  const auto px = render::render_pixels(snap_.scene, prep_, cam);
  scene_io::Image img(cam.width, cam.height);
  for (std::size_t i = 0; i < px.size(); ++i) img.set_pixel(i, px[i]);
  return {200, "image/png", scene_io::encode_png(img), {}};
}

Reply SceneService::render_camera(const std::string& cam) const {
  std::size_t k = 0;
  try {
    std::size_t used = 0;
    const long v = std::stol(cam, &used);
    if (used != cam.size() || v < 0) throw std::invalid_argument(cam);
    k = static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    return error_reply(400, "cam must be a non-negative integer");
  }
  if (k >= snap_.cameras.size()) return error_reply(404, "no camera " + cam);
  return render_with(snap_.cameras[k]);
}

Reply SceneService::render_pose(const std::string& body) const {
  render::Camera cam;
  try {
    const auto j = json::parse(body);
    const auto& in = j.at("intrinsics");
    cam.width = in.at("w").get<int>();
    cam.height = in.at("h").get<int>();
    cam.fx = in.at("fx").get<double>();
    cam.fy = in.at("fy").get<double>();
    cam.cx = in.at("cx").get<double>();
    cam.cy = in.at("cy").get<double>();
    const auto& m = j.at("pose");
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) cam.c2w(r, c) = m.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    }
    if (cam.width > 4096 || cam.height > 4096) throw Error(Errc::InvalidArgument, "image too large");
    cam.validate();
  } catch (const json::exception& e) {
    return error_reply(400, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  return render_with(cam);
}

void SceneService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  server.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (local_origin(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Expose-Headers", "X-Face-Count, X-Retained-Count");
    }
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/scene", [this, send](const httplib::Request&, httplib::Response& res) { send(res, scene()); });
  server.Get("/sites", [this, send](const httplib::Request&, httplib::Response& res) { send(res, sites()); });
  server.Post("/extract",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, extract(req.body)); });
  server.Get("/render", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, req.has_param("cam") ? render_camera(req.get_param_value("cam")) : error_reply(400, "missing cam"));
  });
  server.Post("/render",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, render_pose(req.body)); });
}

void serve(const scene_io::Snapshot& snap, const std::string& bind, int port) {
  SceneService svc(snap);
  httplib::Server server;
  svc.mount(server);
  if (!server.listen(bind, port)) throw Error(Errc::IoError, "cannot listen on " + bind + ":" + std::to_string(port));
}

}  // namespace sdfoam::service
