// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/meshx/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace sdfoam::meshx {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void SurfaceMesh::check() const {
  if (face_colors.size() != faces.size() || face_cells.size() != faces.size()) {
    throw Error(Errc::ShapeMismatch, "face attribute arrays do not match face count");
  }
  for (const auto& f : faces) {
    if (f.size() < 3) throw Error(Errc::InvalidArgument, "face with fewer than 3 vertices");
    for (auto v : f) {
      if (v < 0 || static_cast<std::size_t>(v) >= vertices.size()) throw Error(Errc::InvalidArgument, "face index out of range");
    }
  }
}

std::uint8_t quantize_color(double v) {
  const double c = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::floor(c + 0.5));
}

double polygon_area(const SurfaceMesh& m, std::size_t face) {
  const auto& f = m.faces[face];
  Vec3 n = Vec3::Zero();
  const Vec3& o = m.vertices[static_cast<std::size_t>(f[0])];
  for (std::size_t k = 1; k + 1 < f.size(); ++k) {
    n += (m.vertices[static_cast<std::size_t>(f[k])] - o).cross(m.vertices[static_cast<std::size_t>(f[k + 1])] - o);
  }
  return 0.5 * n.norm();
}

MeshStats mesh_stats(const SurfaceMesh& m) {
  MeshStats s;
  s.faces = m.faces.size();
  std::vector<std::size_t> parent(m.faces.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::map<std::pair<std::int32_t, std::int32_t>, std::vector<std::size_t>> edges;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& ring = m.faces[f];
    for (std::size_t k = 0; k < ring.size(); ++k) {
      auto a = ring[k], b = ring[(k + 1) % ring.size()];
      if (a > b) std::swap(a, b);
      edges[{a, b}].push_back(f);
    }
    s.area += polygon_area(m, f);
  }
  for (const auto& [e, fs] : edges) {
    if (fs.size() == 1) ++s.boundary_edges;
    if (fs.size() > 2) ++s.non_manifold_edges;
    for (std::size_t k = 1; k < fs.size(); ++k) parent[find(fs[k])] = find(fs[0]);
  }
  for (std::size_t f = 0; f < parent.size(); ++f) {
    if (find(f) == f) ++s.components;
  }
  return s;
}

SurfaceMesh triangulate(const SurfaceMesh& m) {
  SurfaceMesh out;
  out.vertices = m.vertices;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& ring = m.faces[f];
    if (ring.size() == 3) {
      out.faces.push_back(ring);
      out.face_colors.push_back(m.face_colors[f]);
      out.face_cells.push_back(m.face_cells[f]);
      continue;
    }
    Vec3 c = Vec3::Zero();
    for (auto v : ring) c += m.vertices[static_cast<std::size_t>(v)];
    c /= static_cast<double>(ring.size());
    const auto ci = static_cast<std::int32_t>(out.vertices.size());
    out.vertices.push_back(c);
    for (std::size_t k = 0; k < ring.size(); ++k) {
      out.faces.push_back({ci, ring[k], ring[(k + 1) % ring.size()]});
      out.face_colors.push_back(m.face_colors[f]);
      out.face_cells.push_back(m.face_cells[f]);
    }
  }
  return out;
}

namespace {

template <typename T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& s, std::size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw Error(Errc::IoError, "PLY body truncated");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_ply(const SurfaceMesh& m) {
  m.check();
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << m.vertices.size() << "\n"
    << "property double x\nproperty double y\nproperty double z\n"
    << "element face " << m.faces.size() << "\n"
    << "property list uchar int vertex_indices\n"
    << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
    << "property int cell\n"
    << "end_header\n";
  std::string s = h.str();
  for (const auto& v : m.vertices) {
    put(s, v.x());
    put(s, v.y());
    put(s, v.z());
  }
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (m.faces[f].size() > 255) throw Error(Errc::InvalidArgument, "face has more than 255 vertices");
    put(s, static_cast<std::uint8_t>(m.faces[f].size()));
    for (auto v : m.faces[f]) put(s, static_cast<std::int32_t>(v));
    for (auto c : m.face_colors[f]) put(s, c);
    put(s, static_cast<std::int32_t>(m.face_cells[f]));
  }
  return s;
}

SurfaceMesh decode_ply(const std::string& bytes) {
  const std::string marker = "end_header\n";
  const auto end = bytes.find(marker);
  if (bytes.rfind("ply\n", 0) != 0 || end == std::string::npos) throw Error(Errc::IoError, "not a PLY file");
  std::istringstream h(bytes.substr(0, end));
  std::string line;
  std::size_t nv = 0, nf = 0;
  bool binary = false;
  std::vector<std::string> face_props;
  std::string current;
  while (std::getline(h, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      binary = fmt == "binary_little_endian";
    } else if (kw == "element") {
      std::size_t n;
      ls >> current >> n;
      if (current == "vertex") nv = n;
      if (current == "face") nf = n;
    } else if (kw == "property" && current == "face") {
      std::string rest;
      std::getline(ls, rest);
      face_props.push_back(rest);
    }
  }
  if (!binary) throw Error(Errc::IoError, "only binary little-endian PLY is supported");
  const bool with_color = face_props.size() >= 4;
  const bool with_cell = face_props.size() >= 5;
  SurfaceMesh m;
  std::size_t pos = end + marker.size();
  for (std::size_t i = 0; i < nv; ++i) {
    const double x = get<double>(bytes, pos);
    const double y = get<double>(bytes, pos);
    const double z = get<double>(bytes, pos);
    m.vertices.emplace_back(x, y, z);
  }
  for (std::size_t f = 0; f < nf; ++f) {
    const auto n = get<std::uint8_t>(bytes, pos);
    std::vector<std::int32_t> ring(n);
    for (auto& v : ring) v = get<std::int32_t>(bytes, pos);
    m.faces.push_back(std::move(ring));
    std::array<std::uint8_t, 3> c{200, 200, 200};
    if (with_color) {
      for (auto& x : c) x = get<std::uint8_t>(bytes, pos);
    }
    m.face_colors.push_back(c);
    m.face_cells.push_back(with_cell ? get<std::int32_t>(bytes, pos) : -1);
  }
  m.check();
  return m;
}

void write_ply(const SurfaceMesh& m, const std::filesystem::path& path) {
  const std::string s = encode_ply(m);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

SurfaceMesh read_ply(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::MissingFile, path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_ply(ss.str());
}

void write_obj(const SurfaceMesh& m, const std::filesystem::path& obj_path) {
  m.check();
  auto mtl_path = obj_path;
  mtl_path.replace_extension(".mtl");
  std::map<std::array<std::uint8_t, 3>, int> materials;
  for (const auto& c : m.face_colors) materials.emplace(c, 0);
  int next = 0;
  for (auto& [c, id] : materials) id = next++;

  std::ofstream mtl(mtl_path);
  if (!mtl) throw Error(Errc::IoError, "cannot open " + mtl_path.string());
  char buf[128];
  for (const auto& [c, id] : materials) {
    std::snprintf(buf, sizeof buf, "newmtl m%d\nKd %.6f %.6f %.6f\n\n", id, c[0] / 255.0, c[1] / 255.0, c[2] / 255.0);
    mtl << buf;
  }
  std::ofstream obj(obj_path);
  if (!obj) throw Error(Errc::IoError, "cannot open " + obj_path.string());
  obj << "mtllib " << mtl_path.filename().string() << "\n";
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    obj << buf;
  }
  int current = -1;
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const int id = materials.at(m.face_colors[f]);
    if (id != current) {
      obj << "usemtl m" << id << "\n";
      current = id;
    }
    obj << "f";
    for (auto v : m.faces[f]) obj << ' ' << v + 1;
    obj << "\n";
  }
  if (!obj || !mtl) throw Error(Errc::IoError, "write failed: " + obj_path.string());
}

}  // namespace sdfoam::meshx
