// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/geometry/delaunay.hpp"

#include "sdfoam/geometry/predicates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace sdfoam::geometry {

namespace {

// Facet keys: the three vertex ids sorted, with the infinite vertex mapped to
// the largest representable value.
using FacetKey = std::array<std::int64_t, 3>;

std::int64_t key_of(SiteId v) {
  return v == kInfinite ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(v);
}

FacetKey facet_key(const std::array<SiteId, 4>& v, int opposite) {
  FacetKey k{};
  int n = 0;
  for (int s = 0; s < 4; ++s) {
    if (s != opposite) k[n++] = key_of(v[s]);
  }
  std::sort(k.begin(), k.end());
  return k;
}

struct FacetKeyHash {
  std::size_t operator()(const FacetKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto x : k) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

int slot_of(const Tetrahedron& t, SiteId v) {
  for (int s = 0; s < 4; ++s) {
    if (t.v[s] == v) return s;
  }
  return -1;
}

// Parity of the permutation taking `a` to `b` (same multiset of 4 values).
bool same_parity(std::array<std::int64_t, 4> a, const std::array<std::int64_t, 4>& b) {
  int swaps = 0;
  for (int i = 0; i < 4; ++i) {
    if (a[i] == b[i]) continue;
    for (int j = i + 1; j < 4; ++j) {
      if (a[j] == b[i]) {
        std::swap(a[i], a[j]);
        ++swaps;
        break;
      }
    }
  }
  return swaps % 2 == 0;
}

std::uint32_t morton_spread(std::uint32_t x) {
  x &= 0x3ff;
  x = (x | (x << 16)) & 0x030000ff;
  x = (x | (x << 8)) & 0x0300f00f;
  x = (x | (x << 4)) & 0x030c30c3;
  x = (x | (x << 2)) & 0x09249249;
  return x;
}

// Biased randomized insertion order: shuffled rounds of doubling size, each
// sorted along a Morton curve so that walks stay short.
std::vector<SiteId> brio_order(std::span<const Vec3> pts, std::uint64_t seed) {
  const std::size_t n = pts.size();
  std::vector<SiteId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 ext = (hi - lo).cwiseMax(Vec3::Constant(1e-300));
  std::vector<std::uint32_t> code(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 q = ((pts[i] - lo).cwiseQuotient(ext) * 1023.0).cwiseMax(Vec3::Zero()).cwiseMin(Vec3::Constant(1023.0));
    code[i] = morton_spread(static_cast<std::uint32_t>(q.x())) |
              (morton_spread(static_cast<std::uint32_t>(q.y())) << 1) |
              (morton_spread(static_cast<std::uint32_t>(q.z())) << 2);
  }

  std::size_t end = n;
  std::vector<std::pair<std::size_t, std::size_t>> rounds;
  while (end > 0) {
    const std::size_t begin = end > 64 ? end / 2 : 0;
    rounds.emplace_back(begin, end);
    end = begin;
  }
  for (auto [b, e] : rounds) {
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e),
                     [&](SiteId l, SiteId r) { return code[static_cast<std::size_t>(l)] < code[static_cast<std::size_t>(r)]; });
  }
  return order;
}

}  // namespace

// Private construction helpers that need access to internals.
struct DelaunayAccess {
  static DelaunayMesh triangulate(std::vector<Vec3> pts, std::vector<std::int64_t> keys, std::uint64_t seed,
                                  SiteId aux_begin, SiteId aux_end);
};

bool DelaunayMesh::alive(SiteId i) const {
  return i >= 0 && static_cast<std::size_t>(i) < points_.size() && point_alive_[static_cast<std::size_t>(i)] != 0;
}

bool DelaunayMesh::tet_finite(TetId t) const {
  const auto& v = tets_[static_cast<std::size_t>(t)].v;
  return v[0] != kInfinite && v[1] != kInfinite && v[2] != kInfinite && v[3] != kInfinite;
}

std::uint64_t DelaunayMesh::next_random() {
  // xorshift64*
  walk_state_ ^= walk_state_ >> 12;
  walk_state_ ^= walk_state_ << 25;
  walk_state_ ^= walk_state_ >> 27;
  return walk_state_ * 2685821657736338717ull;
}

TetId DelaunayMesh::new_tet(const std::array<SiteId, 4>& v) {
  TetId t;
  if (!free_tets_.empty()) {
    t = free_tets_.back();
    free_tets_.pop_back();
    tet_alive_[static_cast<std::size_t>(t)] = 1;
  } else {
    t = static_cast<TetId>(tets_.size());
    tets_.emplace_back();
    tet_alive_.push_back(1);
  }
  auto& T = tets_[static_cast<std::size_t>(t)];
  T.v = v;
  T.n = {kNoTet, kNoTet, kNoTet, kNoTet};
  return t;
}

void DelaunayMesh::free_tet(TetId t) {
  tet_alive_[static_cast<std::size_t>(t)] = 0;
  free_tets_.push_back(t);
}

namespace {

// Links tets across shared facets among `tets` (unmatched facets untouched).
void link_by_facets(std::vector<Tetrahedron>& all, std::span<const TetId> tets) {
  struct Entry {
    FacetKey key;
    TetId t;
    int slot;
  };
  std::vector<Entry> entries;
  entries.reserve(tets.size() * 4);
  for (TetId t : tets) {
    for (int s = 0; s < 4; ++s) entries.push_back({facet_key(all[static_cast<std::size_t>(t)].v, s), t, s});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    if (entries[i].key == entries[i + 1].key) {
      all[static_cast<std::size_t>(entries[i].t)].n[entries[i].slot] = entries[i + 1].t;
      all[static_cast<std::size_t>(entries[i + 1].t)].n[entries[i + 1].slot] = entries[i].t;
      ++i;
    }
  }
}

}  // namespace

void DelaunayMesh::init_simplex(std::array<SiteId, 4> v) {
  if (orient3d(position(v[0]), position(v[1]), position(v[2]), position(v[3])) < 0) std::swap(v[0], v[1]);
  std::vector<TetId> made;
  made.push_back(new_tet(v));
  for (int k = 0; k < 4; ++k) {
    auto iv = v;
    iv[k] = kInfinite;
    // Flip orientation: a point beyond the hull facet must orient positively.
    const int a = (k + 1) % 4;
    const int b = (k + 2) % 4;
    std::swap(iv[a], iv[b]);
    made.push_back(new_tet(iv));
  }
  link_by_facets(tets_, made);
  for (SiteId s : v) vertex_tet_[static_cast<std::size_t>(s)] = made[0];
  hint_ = made[0];
}

TetId DelaunayMesh::locate_tet(const Vec3& p, TetId t) {
  {
    const auto& T = tets_[static_cast<std::size_t>(t)];
    const int inf = slot_of(T, kInfinite);
    if (inf >= 0) t = T.n[inf];
  }
  TetId prev = kNoTet;
  for (;;) {
    const auto& T = tets_[static_cast<std::size_t>(t)];
    if (slot_of(T, kInfinite) >= 0) return t;
    const int off = static_cast<int>(next_random() & 3u);
    bool moved = false;
    for (int i = 0; i < 4; ++i) {
      const int k = (off + i) & 3;
      const TetId nb = T.n[k];
      if (nb == prev) continue;
      const Vec3* q[4] = {&position(T.v[0]), &position(T.v[1]), &position(T.v[2]), &position(T.v[3])};
      q[k] = &p;
      if (orient3d(*q[0], *q[1], *q[2], *q[3]) < 0) {
        prev = t;
        t = nb;
        moved = true;
        break;
      }
    }
    if (!moved) return t;
  }
}

bool DelaunayMesh::finite_conflict(TetId t, SiteId p) const {
  const auto& T = tets_[static_cast<std::size_t>(t)];
  const auto key = [&](SiteId s) { return perturb_key_[static_cast<std::size_t>(s)]; };
  return insphere_perturbed(position(T.v[0]), position(T.v[1]), position(T.v[2]), position(T.v[3]), position(p),
                            {key(T.v[0]), key(T.v[1]), key(T.v[2]), key(T.v[3]), key(p)}) > 0;
}

bool DelaunayMesh::in_conflict(TetId t, SiteId p) const {
  const auto& T = tets_[static_cast<std::size_t>(t)];
  const int inf = slot_of(T, kInfinite);
  if (inf < 0) return finite_conflict(t, p);
  const Vec3* q[4];
  for (int s = 0; s < 4; ++s) q[s] = s == inf ? &position(p) : &position(T.v[s]);
  const int o = orient3d(*q[0], *q[1], *q[2], *q[3]);
  if (o != 0) return o > 0;
  return finite_conflict(T.n[inf], p);
}

SiteId DelaunayMesh::insert_slot(SiteId p) {
  const Vec3& x = position(p);
  TetId start = hint_;
  if (start == kNoTet || !tet_alive(start)) {
    start = kNoTet;
    for (std::size_t t = 0; t < tets_.size(); ++t) {
      if (tet_alive_[t]) {
        start = static_cast<TetId>(t);
        break;
      }
    }
  }
  const TetId t0 = locate_tet(x, start);

  auto check_duplicate = [&](const Tetrahedron& T) {
    for (SiteId s : T.v) {
      if (s != kInfinite && (position(s) - x).norm() < kEpsMerge) {
        throw Error(Errc::DuplicatePoint, "point coincides with site " + std::to_string(s));
      }
    }
  };
  check_duplicate(tets_[static_cast<std::size_t>(t0)]);
  if (!in_conflict(t0, p)) throw std::logic_error("delaunay: located tetrahedron not in conflict");

  // Grow the conflict region (cavity) breadth first.
  if (tet_mark_.size() < tets_.size()) tet_mark_.resize(tets_.size() * 2, 0);
  mark_epoch_ += 2;
  const std::uint32_t in_cavity = mark_epoch_;
  const std::uint32_t outside_cavity = mark_epoch_ + 1;
  std::vector<TetId>& cavity = scratch_cavity_;
  std::vector<std::pair<TetId, int>>& boundary = scratch_boundary_;
  cavity.assign(1, t0);
  boundary.clear();
  tet_mark_[static_cast<std::size_t>(t0)] = in_cavity;
  for (std::size_t i = 0; i < cavity.size(); ++i) {
    const TetId t = cavity[i];
    for (int k = 0; k < 4; ++k) {
      const TetId nb = tets_[static_cast<std::size_t>(t)].n[k];
      auto& mark = tet_mark_[static_cast<std::size_t>(nb)];
      if (mark != in_cavity && mark != outside_cavity) {
        if (in_conflict(nb, p)) {
          mark = in_cavity;
          cavity.push_back(nb);
        } else {
          mark = outside_cavity;
        }
      }
      if (mark == outside_cavity) boundary.emplace_back(t, k);
    }
  }
  for (TetId t : cavity) check_duplicate(tets_[static_cast<std::size_t>(t)]);

  std::vector<TetId>& created = scratch_created_;
  created.clear();
  for (auto [t, k] : boundary) {
    auto v = tets_[static_cast<std::size_t>(t)].v;
    const TetId outside = tets_[static_cast<std::size_t>(t)].n[k];
    v[k] = p;
    const TetId nt = new_tet(v);
    tets_[static_cast<std::size_t>(nt)].n[k] = outside;
    auto& O = tets_[static_cast<std::size_t>(outside)];
    for (int j = 0; j < 4; ++j) {
      if (O.n[j] == t) {
        O.n[j] = nt;
        break;
      }
    }
    created.push_back(nt);
  }

  // Link new tets around p: facets through p are keyed by their other edge.
  {
    struct Entry {
      std::int64_t a, b;
      TetId t;
      int slot;
    };
    std::vector<Entry> entries;
    entries.reserve(created.size() * 3);
    if (tet_mark_.size() < tets_.size()) tet_mark_.resize(tets_.size() * 2, 0);
    for (TetId nt : created) {
      const auto& T = tets_[static_cast<std::size_t>(nt)];
      const int ps = slot_of(T, p);
      for (int m = 0; m < 4; ++m) {
        if (m == ps) continue;
        std::int64_t e[2];
        int c = 0;
        for (int s = 0; s < 4; ++s) {
          if (s != m && s != ps) e[c++] = key_of(T.v[s]);
        }
        if (e[0] > e[1]) std::swap(e[0], e[1]);
        entries.push_back({e[0], e[1], nt, m});
      }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& l, const Entry& r) { return l.a != r.a ? l.a < r.a : l.b < r.b; });
    for (std::size_t i = 0; i + 1 < entries.size(); i += 2) {
      if (entries[i].a != entries[i + 1].a || entries[i].b != entries[i + 1].b) {
        throw std::logic_error("delaunay: cavity boundary is not a closed surface");
      }
      tets_[static_cast<std::size_t>(entries[i].t)].n[entries[i].slot] = entries[i + 1].t;
      tets_[static_cast<std::size_t>(entries[i + 1].t)].n[entries[i + 1].slot] = entries[i].t;
    }
  }

  for (TetId t : cavity) free_tet(t);
  for (TetId nt : created) {
    for (SiteId s : tets_[static_cast<std::size_t>(nt)].v) {
      if (s != kInfinite) vertex_tet_[static_cast<std::size_t>(s)] = nt;
    }
  }
  hint_ = created.front();
  return p;
}

std::vector<TetId> DelaunayMesh::incident_tets(SiteId v) const {
  std::vector<TetId> out;
  const TetId start = vertex_tet_[static_cast<std::size_t>(v)];
  if (start == kNoTet) return out;
  out.push_back(start);
  std::unordered_map<TetId, bool> seen{{start, true}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& T = tets_[static_cast<std::size_t>(out[i])];
    const int vs = slot_of(T, v);
    for (int k = 0; k < 4; ++k) {
      if (k == vs) continue;
      const TetId nb = T.n[k];
      if (seen.emplace(nb, true).second) out.push_back(nb);
    }
  }
  return out;
}

void DelaunayMesh::remove_slot(SiteId v) {
  const std::vector<TetId> hole = incident_tets(v);
  std::vector<SiteId> link;
  for (TetId t : hole) {
    for (SiteId s : tets_[static_cast<std::size_t>(t)].v) {
      if (s != v && s != kInfinite) link.push_back(s);
    }
  }
  std::sort(link.begin(), link.end());
  link.erase(std::unique(link.begin(), link.end()), link.end());
  if (link.size() < 4) throw Error(Errc::DegenerateInput, "removal would leave a flat configuration");

  std::vector<Vec3> lpts;
  std::vector<std::int64_t> lkeys;
  for (SiteId s : link) {
    lpts.push_back(position(s));
    lkeys.push_back(perturb_key_[static_cast<std::size_t>(s)]);
  }
  DelaunayMesh small = DelaunayAccess::triangulate(std::move(lpts), std::move(lkeys), 0x51ed270bull, 0, 0);
  auto to_global = [&](SiteId l) { return l == kInfinite ? kInfinite : link[static_cast<std::size_t>(l)]; };

  // Facets of the small triangulation, keyed in global ids.
  std::unordered_map<FacetKey, std::vector<std::pair<TetId, int>>, FacetKeyHash> small_facets;
  for (std::size_t t = 0; t < small.tets_.size(); ++t) {
    if (!small.tet_alive_[t]) continue;
    std::array<SiteId, 4> gv{};
    for (int s = 0; s < 4; ++s) gv[s] = to_global(small.tets_[t].v[s]);
    for (int s = 0; s < 4; ++s) small_facets[facet_key(gv, s)].emplace_back(static_cast<TetId>(t), s);
  }

  struct HoleFacet {
    TetId outside;
    TetId old_tet;
  };
  std::unordered_map<FacetKey, HoleFacet, FacetKeyHash> hole_facets;
  std::vector<TetId> seeds;
  constexpr std::int64_t kMark = std::numeric_limits<std::int64_t>::min();
  for (TetId t : hole) {
    const auto& T = tets_[static_cast<std::size_t>(t)];
    const int vs = slot_of(T, v);
    const FacetKey key = facet_key(T.v, vs);
    hole_facets.emplace(key, HoleFacet{T.n[vs], t});
    std::array<std::int64_t, 4> want{};
    for (int s = 0; s < 4; ++s) want[s] = s == vs ? kMark : key_of(T.v[s]);
    auto it = small_facets.find(key);
    if (it == small_facets.end()) throw std::logic_error("delaunay: hole facet missing from link triangulation");
    bool found = false;
    for (auto [st, ss] : it->second) {
      std::array<std::int64_t, 4> have{};
      for (int s = 0; s < 4; ++s) {
        have[s] = s == ss ? kMark : key_of(to_global(small.tets_[static_cast<std::size_t>(st)].v[s]));
      }
      if (same_parity(have, want)) {
        seeds.push_back(st);
        found = true;
        break;
      }
    }
    if (!found) throw std::logic_error("delaunay: hole facet orientation mismatch");
  }

  // Flood fill the small tets that lie inside the hole.
  std::unordered_map<TetId, TetId> inside;  // small tet -> new global tet
  std::vector<TetId> order;
  for (TetId s : seeds) {
    if (inside.emplace(s, kNoTet).second) order.push_back(s);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& S = small.tets_[static_cast<std::size_t>(order[i])];
    std::array<SiteId, 4> gv{};
    for (int s = 0; s < 4; ++s) gv[s] = to_global(S.v[s]);
    for (int s = 0; s < 4; ++s) {
      if (hole_facets.count(facet_key(gv, s))) continue;
      const TetId nb = S.n[s];
      if (inside.emplace(nb, kNoTet).second) order.push_back(nb);
    }
  }

  for (TetId t : hole) free_tet(t);
  for (TetId s : order) {
    std::array<SiteId, 4> gv{};
    for (int k = 0; k < 4; ++k) gv[k] = to_global(small.tets_[static_cast<std::size_t>(s)].v[k]);
    inside[s] = new_tet(gv);
  }
  for (TetId s : order) {
    const TetId g = inside[s];
    const auto& S = small.tets_[static_cast<std::size_t>(s)];
    for (int k = 0; k < 4; ++k) {
      const FacetKey key = facet_key(tets_[static_cast<std::size_t>(g)].v, k);
      auto hf = hole_facets.find(key);
      if (hf != hole_facets.end()) {
        tets_[static_cast<std::size_t>(g)].n[k] = hf->second.outside;
        auto& O = tets_[static_cast<std::size_t>(hf->second.outside)];
        for (int j = 0; j < 4; ++j) {
          if (O.n[j] == hf->second.old_tet) {
            O.n[j] = g;
            break;
          }
        }
      } else {
        tets_[static_cast<std::size_t>(g)].n[k] = inside.at(S.n[k]);
      }
    }
    for (SiteId x : tets_[static_cast<std::size_t>(g)].v) {
      if (x != kInfinite) vertex_tet_[static_cast<std::size_t>(x)] = g;
    }
  }
  point_alive_[static_cast<std::size_t>(v)] = 0;
  vertex_tet_[static_cast<std::size_t>(v)] = kNoTet;
  --n_alive_;
  hint_ = order.empty() ? kNoTet : inside[order.front()];
}

DelaunayMesh DelaunayAccess::triangulate(std::vector<Vec3> pts, std::vector<std::int64_t> keys, std::uint64_t seed,
                                         SiteId aux_begin, SiteId aux_end) {
  DelaunayMesh m;
  const std::size_t n = pts.size();
  if (n < 4) throw Error(Errc::DegenerateInput, "need at least 4 points, got " + std::to_string(n));
  for (const auto& p : pts) {
    if (!p.allFinite()) throw Error(Errc::DegenerateInput, "non-finite coordinate");
  }
  m.points_ = std::move(pts);
  m.perturb_key_ = std::move(keys);
  m.point_alive_.assign(n, 1);
  m.vertex_tet_.assign(n, kNoTet);
  m.n_alive_ = n;
  m.n_user_limit_ = aux_begin;
  m.aux_end_ = aux_end;
  m.walk_state_ ^= seed * 0xbf58476d1ce4e5b9ull + 1;

  const std::vector<SiteId> order = brio_order(m.points_, seed);

  // Initial simplex from the first affinely independent points in order.
  const SiteId a = order[0];
  const Vec3& pa = m.position(a);
  std::size_t ib = 1;
  while (ib < n && (m.position(order[ib]) - pa).norm() == 0.0) ++ib;
  if (ib == n) throw Error(Errc::DuplicatePoint, "all points coincide");
  const SiteId b = order[ib];
  if ((m.position(b) - pa).norm() < kEpsMerge) {
    throw Error(Errc::DuplicatePoint, "sites " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
  }
  const Vec3 ab = m.position(b) - pa;
  SiteId c = kInfinite;
  SiteId d = kInfinite;
  int c_attempts = 0;
  for (std::size_t i = 1; i < n && d == kInfinite && c_attempts < 4; ++i) {
    const SiteId ci = order[i];
    if (ci == b || ab.cross(m.position(ci) - pa).squaredNorm() == 0.0) continue;
    ++c_attempts;
    for (std::size_t j = 1; j < n; ++j) {
      const SiteId dj = order[j];
      if (dj == b || dj == ci) continue;
      if (orient3d(pa, m.position(b), m.position(ci), m.position(dj)) != 0) {
        c = ci;
        d = dj;
        break;
      }
    }
  }
  if (d == kInfinite) throw Error(Errc::DegenerateInput, "all points are coplanar or collinear");
  const std::array<SiteId, 4> simplex{a, b, c, d};
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      if ((m.position(simplex[i]) - m.position(simplex[j])).norm() < kEpsMerge) {
        throw Error(Errc::DuplicatePoint,
                    "sites " + std::to_string(simplex[i]) + " and " + std::to_string(simplex[j]) + " coincide");
      }
    }
  }
  m.tets_.reserve(n * 7);
  m.init_simplex(simplex);
  for (SiteId s : order) {
    if (s == a || s == b || s == c || s == d) continue;
    m.insert_slot(s);
  }
  return m;
}

DelaunayMesh DelaunayMesh::build(std::span<const Vec3> points, std::uint64_t seed, BuildOptions options) {
  std::vector<Vec3> pts(points.begin(), points.end());
  SiteId aux_begin = 0;
  SiteId aux_end = 0;
  if (options.bounding_tetrahedron) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    if (pts.empty()) lo = hi = Vec3::Zero();
    const Vec3 center = 0.5 * (lo + hi);
    const double radius = 20.0 * std::max(1.0, 0.5 * (hi - lo).norm());
    aux_begin = static_cast<SiteId>(pts.size());
    pts.push_back(center + radius * Vec3(1, 1, 1));
    pts.push_back(center + radius * Vec3(1, -1, -1));
    pts.push_back(center + radius * Vec3(-1, 1, -1));
    pts.push_back(center + radius * Vec3(-1, -1, 1));
    aux_end = aux_begin + 4;
  }
  std::vector<std::int64_t> keys(pts.size());
  std::iota(keys.begin(), keys.end(), 0);
  DelaunayMesh m = DelaunayAccess::triangulate(std::move(pts), std::move(keys), seed, aux_begin, aux_end);
  m.refresh();
  return m;
}

SiteId DelaunayMesh::insert(const Vec3& point) {
  if (!point.allFinite()) throw Error(Errc::DegenerateInput, "non-finite coordinate");
  const auto id = static_cast<SiteId>(points_.size());
  points_.push_back(point);
  perturb_key_.push_back(id);
  point_alive_.push_back(1);
  vertex_tet_.push_back(kNoTet);
  try {
    insert_slot(id);
  } catch (...) {
    points_.pop_back();
    perturb_key_.pop_back();
    point_alive_.pop_back();
    vertex_tet_.pop_back();
    throw;
  }
  ++n_alive_;
  refresh();
  return id;
}

void DelaunayMesh::remove(SiteId id) {
  if (!alive(id) || is_auxiliary(id)) throw Error(Errc::UnknownId, "no live site with id " + std::to_string(id));
  remove_slot(id);
  refresh();
}

void DelaunayMesh::refresh() {
  const std::size_t nt = tets_.size();
  const std::size_t np = points_.size();
  circumcenters_.assign(nt, Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
  hull_.assign(np, 0);
  std::vector<std::uint32_t> count(np + 1, 0);
  for (std::size_t t = 0; t < nt; ++t) {
    if (!tet_alive_[t]) continue;
    const auto& v = tets_[t].v;
    const bool finite = slot_of(tets_[t], kInfinite) < 0;
    if (finite) {
      circumcenters_[t] = geometry::circumcenter(position(v[0]), position(v[1]), position(v[2]), position(v[3]));
    }
    for (SiteId s : v) {
      if (s == kInfinite) continue;
      if (!finite) hull_[static_cast<std::size_t>(s)] = 1;
      count[static_cast<std::size_t>(s)] += 3;
    }
  }
  // Bucket (neighbor, tet) pairs by site, then sort/unique each bucket.
  std::vector<std::uint32_t> start(np + 1, 0);
  for (std::size_t i = 0; i < np; ++i) start[i + 1] = start[i] + count[i];
  std::vector<std::pair<SiteId, TetId>> raw(start[np]);
  std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
  for (std::size_t t = 0; t < nt; ++t) {
    if (!tet_alive_[t]) continue;
    const auto& v = tets_[t].v;
    for (int a = 0; a < 4; ++a) {
      if (v[a] == kInfinite) continue;
      for (int b = 0; b < 4; ++b) {
        if (b == a) continue;
        raw[fill[static_cast<std::size_t>(v[a])]++] = {v[b], static_cast<TetId>(t)};
      }
    }
  }
  adj_offsets_.assign(np + 1, 0);
  adj_sites_.clear();
  adj_tets_.clear();
  adj_sites_.reserve(raw.size() / 3);
  adj_tets_.reserve(raw.size() / 3);
  for (std::size_t i = 0; i < np; ++i) {
    auto first = raw.begin() + start[i];
    auto last = raw.begin() + fill[i];
    std::sort(first, last, [](const auto& l, const auto& r) { return l.first != r.first ? l.first < r.first : l.second < r.second; });
    SiteId prev = kInfinite;
    for (auto it = first; it != last; ++it) {
      if (it->first == kInfinite || it->first == prev) continue;
      prev = it->first;
      adj_sites_.push_back(it->first);
      adj_tets_.push_back(it->second);
    }
    adj_offsets_[i + 1] = static_cast<std::uint32_t>(adj_sites_.size());
  }
}

std::span<const SiteId> DelaunayMesh::neighbors(SiteId i) const {
  const auto b = adj_offsets_[static_cast<std::size_t>(i)];
  const auto e = adj_offsets_[static_cast<std::size_t>(i) + 1];
  return {adj_sites_.data() + b, adj_sites_.data() + e};
}

bool DelaunayMesh::is_edge(SiteId i, SiteId j) const {
  if (!alive(i) || !alive(j)) return false;
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

TetId DelaunayMesh::find_edge_tet(SiteId i, SiteId j) const {
  if (!alive(i) || !alive(j)) return kNoTet;
  auto nb = neighbors(i);
  auto it = std::lower_bound(nb.begin(), nb.end(), j);
  if (it == nb.end() || *it != j) return kNoTet;
  return adj_tets_[adj_offsets_[static_cast<std::size_t>(i)] + static_cast<std::size_t>(it - nb.begin())];
}

std::vector<TetId> DelaunayMesh::finite_tets() const {
  std::vector<TetId> out;
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    if (tet_alive_[t] && tet_finite(static_cast<TetId>(t))) out.push_back(static_cast<TetId>(t));
  }
  return out;
}

std::size_t DelaunayMesh::finite_tet_count() const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < tets_.size(); ++t) {
    if (tet_alive_[t] && tet_finite(static_cast<TetId>(t))) ++n;
  }
  return n;
}

std::vector<std::pair<SiteId, SiteId>> DelaunayMesh::edges() const {
  std::vector<std::pair<SiteId, SiteId>> out;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (SiteId j : neighbors(static_cast<SiteId>(i))) {
      if (static_cast<SiteId>(i) < j) out.emplace_back(static_cast<SiteId>(i), j);
    }
  }
  return out;
}

std::vector<double> DelaunayMesh::mean_neighbor_distance() const {
  std::vector<double> out(points_.size(), 0.0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (is_auxiliary(static_cast<SiteId>(i))) continue;
    double sum = 0.0;
    std::size_t count = 0;
    for (SiteId j : neighbors(static_cast<SiteId>(i))) {
      if (is_auxiliary(j)) continue;
      sum += (position(j) - points_[i]).norm();
      ++count;
    }
    if (count > 0) out[i] = sum / static_cast<double>(count);
  }
  return out;
}

SiteId DelaunayMesh::locate_cell(const Vec3& x, SiteId hint) const {
  SiteId cur = hint;
  if (!alive(cur)) {
    cur = kInfinite;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (point_alive_[i]) {
        cur = static_cast<SiteId>(i);
        break;
      }
    }
  }
  double dcur = (position(cur) - x).squaredNorm();
  for (;;) {
    SiteId best = cur;
    double dbest = dcur;
    for (SiteId nb : neighbors(cur)) {
      const double d = (position(nb) - x).squaredNorm();
      if (d < dbest || (d == dbest && nb < best)) {
        best = nb;
        dbest = d;
      }
    }
    if (best == cur) break;
    cur = best;
    dcur = dbest;
  }
  // Equidistant sites form a connected subgraph; take the lowest id among them.
  std::vector<SiteId> ties{cur};
  SiteId lowest = cur;
  for (std::size_t i = 0; i < ties.size(); ++i) {
    for (SiteId nb : neighbors(ties[i])) {
      if ((position(nb) - x).squaredNorm() == dcur && std::find(ties.begin(), ties.end(), nb) == ties.end()) {
        ties.push_back(nb);
        lowest = std::min(lowest, nb);
      }
    }
  }
  return lowest;
}

CellExit DelaunayMesh::bisector_exit(const Vec3& origin, const Vec3& dir, SiteId current, double t_entry) const {
  const Vec3& pi = position(current);
  double best = std::numeric_limits<double>::infinity();
  SiteId next = kInfinite;
  for (SiteId j : neighbors(current)) {
    const Vec3& pj = position(j);
    const Vec3 n = pj - pi;
    const double den = dir.dot(n);
    if (den <= 0.0) continue;
    const double t = n.dot(0.5 * (pi + pj) - origin) / den;
    if (t < best || (t == best && j < next)) {
      best = t;
      next = j;
    }
  }
  if (next == kInfinite) return {std::numeric_limits<double>::infinity(), std::nullopt};
  return {std::max(best, t_entry), next};
}

VoronoiFace DelaunayMesh::voronoi_face(SiteId i, SiteId j) const {
  const TetId start = find_edge_tet(i, j);
  if (start == kNoTet) {
    throw Error(Errc::NotAnEdge, "(" + std::to_string(i) + ", " + std::to_string(j) + ") is not a Delaunay edge");
  }
  VoronoiFace face;
  face.i = i;
  face.j = j;

  std::vector<TetId> ring;
  TetId cur = start;
  SiteId entered = kInfinite;
  {
    const auto& T = tets_[static_cast<std::size_t>(start)];
    for (SiteId s : T.v) {
      if (s != i && s != j) {
        entered = s;
        break;
      }
    }
  }
  do {
    ring.push_back(cur);
    const auto& T = tets_[static_cast<std::size_t>(cur)];
    SiteId other = kInfinite;
    int entered_slot = -1;
    for (int s = 0; s < 4; ++s) {
      if (T.v[s] == i || T.v[s] == j) continue;
      if (T.v[s] == entered && entered_slot < 0) {
        entered_slot = s;
      } else {
        other = T.v[s];
      }
    }
    cur = T.n[entered_slot];
    entered = other;
  } while (cur != start && ring.size() <= tets_.size());

  std::size_t first = 0;
  for (std::size_t k = 0; k < ring.size(); ++k) {
    const bool bad = !tet_finite(ring[k]) ||
                     (aux_end_ > n_user_limit_ && std::any_of(tets_[static_cast<std::size_t>(ring[k])].v.begin(),
                                                               tets_[static_cast<std::size_t>(ring[k])].v.end(),
                                                               [&](SiteId s) { return is_auxiliary(s); }));
    if (bad) {
      face.unbounded = true;
      first = k;
    }
  }
  for (std::size_t k = 0; k < ring.size(); ++k) {
    const TetId t = ring[(first + 1 + k) % ring.size()];
    if (!tet_finite(t)) continue;
    if (face.unbounded && std::any_of(tets_[static_cast<std::size_t>(t)].v.begin(), tets_[static_cast<std::size_t>(t)].v.end(),
                                      [&](SiteId s) { return is_auxiliary(s); })) {
      continue;
    }
    face.tets.push_back(t);
    face.vertices.push_back(circumcenter(t));
  }
  if (!face.unbounded) {
    // Newell normal must agree with p_j - p_i.
    Vec3 normal = Vec3::Zero();
    const std::size_t m = face.vertices.size();
    for (std::size_t k = 0; k < m; ++k) normal += face.vertices[k].cross(face.vertices[(k + 1) % m]);
    if (normal.dot(position(j) - position(i)) < 0.0) {
      std::reverse(face.tets.begin(), face.tets.end());
      std::reverse(face.vertices.begin(), face.vertices.end());
    }
  } else if (face.vertices.size() >= 2) {
    Vec3 normal = Vec3::Zero();
    const Vec3 c = position(i) * 0.5 + position(j) * 0.5;
    for (std::size_t k = 0; k + 1 < face.vertices.size(); ++k) {
      normal += (face.vertices[k] - c).cross(face.vertices[k + 1] - c);
    }
    if (normal.dot(position(j) - position(i)) < 0.0) {
      std::reverse(face.tets.begin(), face.tets.end());
      std::reverse(face.vertices.begin(), face.vertices.end());
    }
  }
  return face;
}

}  // namespace sdfoam::geometry
