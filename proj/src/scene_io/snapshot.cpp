// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/scene_io/snapshot.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace sdfoam::scene_io {

using nlohmann::json;

namespace {

constexpr std::size_t kTagSize = 8;
constexpr std::size_t kCameraDoubles = 22;

std::uint32_t crc_of(const std::vector<double>& v) {
  const auto* p = reinterpret_cast<const Bytef*>(v.data());
  std::size_t left = v.size() * sizeof(double);
  uLong crc = crc32(0L, Z_NULL, 0);
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename V>
void append_vec3(std::vector<double>& out, const std::vector<V>& xs) {
  for (const auto& x : xs) out.insert(out.end(), {x[0], x[1], x[2]});
}

std::vector<Vec3> to_vec3(const std::vector<double>& v) {
  std::vector<Vec3> out(v.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return out;
}

json field_header(const field::SdfField& f) {
  json j;
  j["kind"] = f.kind();
  if (const auto* mlp = dynamic_cast<const field::MlpField*>(&f)) {
    const auto& c = mlp->config();
    j["frequencies"] = c.frequencies;
    j["hidden"] = c.hidden;
    j["layers"] = c.layers;
    j["softplus_beta"] = c.softplus_beta;
    j["init_radius"] = c.init_radius;
    j["center"] = {c.center.x(), c.center.y(), c.center.z()};
    j["seed"] = c.seed;
  }
  return j;
}

std::unique_ptr<field::SdfField> make_field(const json& j, const std::vector<double>& params) {
  const auto kind = j.at("kind").get<std::string>();
  std::unique_ptr<field::SdfField> f;
  if (kind == "mlp") {
    field::MlpConfig c;
    c.frequencies = j.at("frequencies").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.layers = j.at("layers").get<int>();
    c.softplus_beta = j.at("softplus_beta").get<double>();
    c.init_radius = j.at("init_radius").get<double>();
    const auto& ce = j.at("center");
    c.center = Vec3(ce.at(0).get<double>(), ce.at(1).get<double>(), ce.at(2).get<double>());
    c.seed = j.at("seed").get<std::uint64_t>();
    if (field::MlpField::param_count_for(c) != params.size()) {
      throw Error(Errc::CorruptSection, "field parameter count does not match the architecture");
    }
    return std::make_unique<field::MlpField>(c, params);
  }
  if (kind == "linear") {
    f = std::make_unique<field::LinearField>(Vec3::UnitZ(), 0.0);
  } else if (kind == "sphere") {
    f = std::make_unique<field::SphereField>(Vec3::Zero(), 1.0);
  } else {
    throw Error(Errc::CorruptSection, "unknown field kind '" + kind + "'");
  }
  if (f->param_count() != params.size()) throw Error(Errc::CorruptSection, "field parameter count mismatch");
  std::copy(params.begin(), params.end(), f->params().begin());
  return f;
}

}  // namespace

std::vector<double> canonical_alpha(const geometry::DelaunayMesh& mesh, std::span<const double> rho) {
  const auto r = mesh.mean_neighbor_distance();
  std::vector<double> a(rho.size(), 0.0);
  for (std::size_t i = 0; i < rho.size(); ++i) a[i] = 1.0 - std::exp(-rho[i] * r[i]);
  return a;
}

void refresh_cache(Snapshot& snap) {
  const auto& s = snap.scene;
  s.sites.check();
  if (!s.field) throw Error(Errc::InvalidArgument, "snapshot scene has no field");
  snap.sdf = field::sdf_eval(*s.field, s.sites.positions);
  std::vector<double> rho(snap.sdf.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = s.mapping.density(snap.sdf[i]);
  if (s.sites.size() >= 4) {
    const auto mesh = geometry::DelaunayMesh::build(s.sites.positions, s.seed, {.bounding_tetrahedron = true});
    snap.alpha = canonical_alpha(mesh, rho);
  } else {
    snap.alpha.assign(rho.size(), 0.0);
  }
}

Snapshot make_snapshot(render::Scene scene, std::vector<render::Camera> cameras) {
  Snapshot snap;
  snap.scene = std::move(scene);
  snap.cameras = std::move(cameras);
  refresh_cache(snap);
  return snap;
}

std::string encode_snapshot(const Snapshot& snap) {
  const auto& s = snap.scene;
  s.sites.check();
  if (!s.field) throw Error(Errc::InvalidArgument, "snapshot scene has no field");
  const std::size_t n = s.sites.size();
  if (snap.sdf.size() != n || snap.alpha.size() != n) throw Error(Errc::ShapeMismatch, "snapshot caches do not match sites");

  std::vector<std::pair<std::string, std::vector<double>>> sections;
  std::vector<double> buf;
  append_vec3(buf, s.sites.positions);
  sections.emplace_back("positions", std::move(buf));
  buf = {};
  append_vec3(buf, s.sites.colors);
  sections.emplace_back("colors", std::move(buf));
  sections.emplace_back("sh", s.sites.sh);
  const auto p = s.field->params();
  sections.emplace_back("field_params", std::vector<double>(p.begin(), p.end()));
  sections.emplace_back("scalars", std::vector<double>{s.mapping.raw_beta, s.background.x(), s.background.y(),
                                                       s.background.z(), s.center.x(), s.center.y(), s.center.z(),
                                                       s.far_radius});
  sections.emplace_back("sdf", snap.sdf);
  sections.emplace_back("alpha", snap.alpha);
  buf = {};
  for (const auto& c : snap.cameras) {
    buf.insert(buf.end(), {static_cast<double>(c.width), static_cast<double>(c.height), c.fx, c.fy, c.cx, c.cy});
    for (int r = 0; r < 4; ++r) {
      for (int k = 0; k < 4; ++k) buf.push_back(c.c2w(r, k));
    }
  }
  sections.emplace_back("cameras", std::move(buf));

  json h;
  h["version"] = kSnapshotVersion;
  h["n_sites"] = n;
  h["n_cameras"] = snap.cameras.size();
  h["sh_stride"] = render::kShStride;
  h["field"] = field_header(*s.field);
  h["beta"] = s.mapping.beta();
  h["step"] = s.step;
  h["seed"] = s.seed;
  json secs = json::array();
  std::size_t offset = 0;
  for (const auto& [name, data] : sections) {
    secs.push_back({{"name", name}, {"offset", offset}, {"count", data.size()}, {"crc32", crc_of(data)}});
    offset += data.size() * sizeof(double);
  }
  h["sections"] = secs;
  const std::string header = h.dump();

  std::string out(kSnapshotVersion, kTagSize);
  const std::uint64_t hl = header.size();
  out.append(reinterpret_cast<const char*>(&hl), sizeof hl);
  out += header;
  for (const auto& [name, data] : sections) {
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  return out;
}

void save_snapshot(const Snapshot& snap, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(snap);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

Snapshot decode_snapshot(const std::string& bytes) {
  if (bytes.size() < kTagSize || bytes.compare(0, kTagSize, kSnapshotVersion) != 0) {
    throw Error(Errc::VersionMismatch, "expected " + std::string(kSnapshotVersion) + " snapshot");
  }
  std::uint64_t hl = 0;
  if (bytes.size() < kTagSize + sizeof hl) throw Error(Errc::CorruptSection, "truncated header");
  std::memcpy(&hl, bytes.data() + kTagSize, sizeof hl);
  const std::size_t data_start = kTagSize + sizeof hl + hl;
  if (hl > bytes.size() || data_start > bytes.size()) throw Error(Errc::CorruptSection, "truncated header");

  json h;
  try {
    h = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(kTagSize + sizeof hl),
                    bytes.begin() + static_cast<std::ptrdiff_t>(data_start));
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptSection, std::string("header: ") + e.what());
  }
  try {
    if (h.at("version").get<std::string>() != kSnapshotVersion) {
      throw Error(Errc::VersionMismatch, "header version " + h.at("version").get<std::string>());
    }
    if (h.at("sh_stride").get<int>() != render::kShStride) throw Error(Errc::VersionMismatch, "SH layout differs");
    std::map<std::string, std::vector<double>> sec;
    for (const auto& e : h.at("sections")) {
      const auto name = e.at("name").get<std::string>();
      const auto off = e.at("offset").get<std::size_t>();
      const auto count = e.at("count").get<std::size_t>();
      if (count > bytes.size() / sizeof(double) || off > bytes.size() ||
          data_start + off + count * sizeof(double) > bytes.size()) {
        throw Error(Errc::CorruptSection, "section '" + name + "' is truncated");
      }
      std::vector<double> v(count);
      std::memcpy(v.data(), bytes.data() + data_start + off, count * sizeof(double));
      if (crc_of(v) != e.at("crc32").get<std::uint32_t>()) {
        throw Error(Errc::CorruptSection, "checksum mismatch in section '" + name + "'");
      }
      sec[name] = std::move(v);
    }
    auto take = [&](const char* name, std::size_t expect) -> std::vector<double>& {
      auto it = sec.find(name);
      if (it == sec.end()) throw Error(Errc::CorruptSection, std::string("missing section '") + name + "'");
      if (expect != static_cast<std::size_t>(-1) && it->second.size() != expect) {
        throw Error(Errc::CorruptSection, std::string("section '") + name + "' has the wrong length");
      }
      return it->second;
    };
    const auto n = h.at("n_sites").get<std::size_t>();
    const auto nc = h.at("n_cameras").get<std::size_t>();
    Snapshot snap;
    auto& s = snap.scene;
    s.sites.positions = to_vec3(take("positions", 3 * n));
    s.sites.colors = to_vec3(take("colors", 3 * n));
    s.sites.sh = std::move(take("sh", n * render::kShStride));
    s.field = make_field(h.at("field"), take("field_params", static_cast<std::size_t>(-1)));
    const auto& sc = take("scalars", 8);
    s.mapping.raw_beta = sc[0];
    s.background = Vec3(sc[1], sc[2], sc[3]);
    s.center = Vec3(sc[4], sc[5], sc[6]);
    s.far_radius = sc[7];
    s.step = h.at("step").get<std::uint64_t>();
    s.seed = h.at("seed").get<std::uint64_t>();
    snap.sdf = std::move(take("sdf", n));
    snap.alpha = std::move(take("alpha", n));
    const auto& cams = take("cameras", nc * kCameraDoubles);
    for (std::size_t k = 0; k < nc; ++k) {
      const double* c = cams.data() + k * kCameraDoubles;
      render::Camera cam;
      cam.width = static_cast<int>(c[0]);
      cam.height = static_cast<int>(c[1]);
      cam.fx = c[2];
      cam.fy = c[3];
      cam.cx = c[4];
      cam.cy = c[5];
      for (int r = 0; r < 4; ++r) {
        for (int q = 0; q < 4; ++q) cam.c2w(r, q) = c[6 + 4 * r + q];
      }
      snap.cameras.push_back(cam);
    }
    return snap;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptSection, std::string("header: ") + e.what());
  }
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::MissingFile, path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_snapshot(ss.str());
}

}  // namespace sdfoam::scene_io
