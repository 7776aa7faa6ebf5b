#include "femwave/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

namespace femwave {
namespace {

std::pair<int, int> sorted_pair(int u, int v) {
  return u < v ? std::make_pair(u, v) : std::make_pair(v, u);
}

std::string edge_str(int u, int v) {
  return "(" + std::to_string(u) + "," + std::to_string(v) + ")";
}

}  // namespace

Triangulation Triangulation::build(std::vector<Vec2R> vertices,
                                   std::vector<std::array<int, 3>> triangles,
                                   const std::vector<std::pair<int, int>>& gamma_edges,
                                   MeshValidation validation,
                                   const std::string& name) {
  Triangulation m;
  m.name_ = name;
  m.vertices_ = std::move(vertices);
  m.triangles_ = std::move(triangles);
  const int nv = m.vertex_count();
  const int nt = m.triangle_count();
  auto fail = [&](const std::string& what) {
    throw MeshError(name + ": " + what);
  };

  m.volume_.reserve(nt);
  m.tri_edges_.assign(nt, {-1, -1, -1});
  m.vertex_tris_.assign(nv, {});
  m.total_volume_ = 0;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = m.triangles_[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv)
        fail("triangle " + std::to_string(t) + " references invalid vertex " +
             std::to_string(tri[k]));
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      fail("triangle " + std::to_string(t) + " repeats a vertex");
    const Vec2R &p0 = m.vertices_[tri[0]], &p1 = m.vertices_[tri[1]],
                &p2 = m.vertices_[tri[2]];
    Rat cross = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
    if (cross == 0) fail("triangle " + std::to_string(t) + " is degenerate");
    Rat vol = abs(cross) / 2;
    m.total_volume_ += vol;
    m.volume_.push_back(std::move(vol));
    for (int k = 0; k < 3; ++k) {
      const auto key = sorted_pair(tri[(k + 1) % 3], tri[(k + 2) % 3]);
      auto it = m.edge_ids_.find(key);
      int e;
      if (it == m.edge_ids_.end()) {
        e = m.edge_count();
        m.edge_ids_.emplace(key, e);
        m.edges_.push_back(key);
        m.edge_tris_.push_back({});
      } else {
        e = it->second;
      }
      m.tri_edges_[t][k] = e;
      m.edge_tris_[e].push_back(t);
      m.vertex_tris_[tri[k]].push_back(t);
    }
  }

  for (int e = 0; e < m.edge_count(); ++e)
    if (m.edge_tris_[e].size() > 2)
      fail("edge " + edge_str(m.edges_[e].first, m.edges_[e].second) +
           " is shared by " + std::to_string(m.edge_tris_[e].size()) +
           " triangles");
  for (int v = 0; v < nv; ++v) {
    auto& tl = m.vertex_tris_[v];
    std::sort(tl.begin(), tl.end());
    tl.erase(std::unique(tl.begin(), tl.end()), tl.end());
    if (tl.empty()) fail("vertex " + std::to_string(v) + " belongs to no triangle");
  }

  m.gamma_edge_.assign(m.edge_count(), false);
  m.gamma_vertex_.assign(nv, false);
  for (const auto& [u, v] : gamma_edges) {
    if (u < 0 || u >= nv || v < 0 || v >= nv || u == v)
      fail("boundary-condition edge " + edge_str(u, v) + " has invalid vertex ids");
    const int e = m.edge_id(u, v);
    if (e < 0)
      fail("boundary-condition edge " + edge_str(u, v) + " is not a mesh edge");
    if (!m.is_boundary_edge(e))
      fail("boundary-condition edge " + edge_str(u, v) + " is not on the boundary");
    m.gamma_edge_[e] = true;
    m.gamma_vertex_[u] = true;
    m.gamma_vertex_[v] = true;
  }

  if (validation == MeshValidation::Full) {
    std::map<std::pair<Rat, Rat>, int> seen;
    for (int v = 0; v < nv; ++v) {
      auto [it, fresh] = seen.emplace(std::make_pair(m.vertices_[v].x, m.vertices_[v].y), v);
      if (!fresh)
        fail("vertices " + std::to_string(it->second) + " and " + std::to_string(v) +
             " coincide");
    }
    for (int e = 0; e < m.edge_count(); ++e) {
      const auto [u, v] = m.edges_[e];
      const Vec2R &pu = m.vertices_[u], &pv = m.vertices_[v];
      const Rat dx = pv.x - pu.x, dy = pv.y - pu.y;
      const Rat len2 = dx * dx + dy * dy;
      for (int w = 0; w < nv; ++w) {
        if (w == u || w == v) continue;
        const Rat wx = m.vertices_[w].x - pu.x, wy = m.vertices_[w].y - pu.y;
        if (wx * dy - wy * dx != 0) continue;  // not collinear
        const Rat s = wx * dx + wy * dy;
        if (s > 0 && s < len2)
          fail("vertex " + std::to_string(w) + " lies inside edge " + edge_str(u, v) +
               " (hanging node)");
      }
    }
  }
  return m;
}

int Triangulation::edge_id(int u, int v) const {
  auto it = edge_ids_.find(sorted_pair(u, v));
  return it == edge_ids_.end() ? -1 : it->second;
}

Vec2R Triangulation::p2_node_point(int n) const {
  if (n < 0 || n >= p2_node_count())
    throw std::out_of_range(name_ + ": invalid P2 node id " + std::to_string(n));
  if (n < vertex_count()) return vertices_[n];
  const auto [u, v] = edges_[n - vertex_count()];
  return Vec2R{(vertices_[u].x + vertices_[v].x) / 2,
               (vertices_[u].y + vertices_[v].y) / 2};
}

bool Triangulation::p2_node_on_gamma(int n) const {
  if (n < 0 || n >= p2_node_count())
    throw std::out_of_range(name_ + ": invalid P2 node id " + std::to_string(n));
  return n < vertex_count() ? gamma_vertex_[n] : gamma_edge_[n - vertex_count()];
}

bool Triangulation::p2_node_in_triangle(int n, int t, Bary* bary) const {
  const auto& tri = triangles_[t];
  if (n < vertex_count()) {
    for (int k = 0; k < 3; ++k)
      if (tri[k] == n) {
        std::array<Rat, 3> l{Rat(0), Rat(0), Rat(0)};
        l[k] = 1;
        *bary = Bary::of(l[0], l[1], l[2]);
        return true;
      }
    return false;
  }
  const int e = n - vertex_count();
  for (int k = 0; k < 3; ++k)
    if (tri_edges_[t][k] == e) {
      std::array<Rat, 3> l{Rat(1, 2), Rat(1, 2), Rat(1, 2)};
      l[k] = 0;
      *bary = Bary::of(l[0], l[1], l[2]);
      return true;
    }
  return false;
}

// ---------------------------------------------------------------------------
// Loader

Triangulation load_mesh(std::istream& in, const std::string& name) {
  auto fail = [&](int line, const std::string& what) {
    throw MeshError(name + ":" + std::to_string(line) + ": " + what);
  };
  std::vector<Vec2R> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::pair<int, int>> gammas;

  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    if (!have_header) {
      std::string ver;
      if (tok != "femwave-mesh" || !(ls >> ver) || ver != "1")
        fail(lineno, "expected header 'femwave-mesh 1'");
      have_header = true;
      continue;
    }
    auto read_int = [&](const char* what) {
      std::string s;
      if (!(ls >> s)) fail(lineno, std::string("missing ") + what);
      try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        fail(lineno, "invalid integer '" + s + "' for " + what);
      }
      return -1;  // unreachable
    };
    auto read_rat = [&](const char* what) {
      std::string s;
      if (!(ls >> s)) fail(lineno, std::string("missing ") + what);
      const auto r = parse_rational(s);
      if (!r) fail(lineno, "invalid coordinate '" + s + "' for " + what);
      return *r;
    };
    if (tok == "v") {
      const Rat x = read_rat("x coordinate");
      const Rat y = read_rat("y coordinate");
      vertices.push_back(Vec2R{x, y});
    } else if (tok == "t") {
      const int i = read_int("vertex id"), j = read_int("vertex id"),
                k = read_int("vertex id");
      triangles.push_back({i, j, k});
    } else if (tok == "g") {
      const int i = read_int("vertex id"), j = read_int("vertex id");
      gammas.emplace_back(i, j);
    } else {
      fail(lineno, "unknown record '" + tok + "'");
    }
    std::string extra;
    if (ls >> extra) fail(lineno, "trailing token '" + extra + "'");
  }
  if (!have_header) throw MeshError(name + ": empty input (missing header)");
  return Triangulation::build(std::move(vertices), std::move(triangles), gammas,
                              MeshValidation::Full, name);
}

Triangulation load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError(path + ": cannot open file");
  return load_mesh(in, path);
}

// ---------------------------------------------------------------------------
// Red refinement

Triangulation refine(const Triangulation& c) {
  const int nvc = c.vertex_count();
  std::vector<Vec2R> verts;
  verts.reserve(nvc + c.edge_count());
  for (int v = 0; v < nvc; ++v) verts.push_back(c.vertex(v));
  for (int e = 0; e < c.edge_count(); ++e) verts.push_back(c.p2_node_point(nvc + e));

  std::vector<std::array<int, 3>> tris;
  tris.reserve(4 * c.triangle_count());
  for (int t = 0; t < c.triangle_count(); ++t) {
    const auto& tri = c.triangle(t);
    const int m0 = nvc + c.tri_edge(t, 0), m1 = nvc + c.tri_edge(t, 1),
              m2 = nvc + c.tri_edge(t, 2);
    tris.push_back({tri[0], m2, m1});
    tris.push_back({tri[1], m0, m2});
    tris.push_back({tri[2], m1, m0});
    tris.push_back({m0, m1, m2});
  }

  std::vector<std::pair<int, int>> gammas;
  for (int e = 0; e < c.edge_count(); ++e) {
    if (!c.is_gamma_edge(e)) continue;
    const auto [u, v] = c.edge(e);
    gammas.emplace_back(u, nvc + e);
    gammas.emplace_back(nvc + e, v);
  }
  return Triangulation::build(std::move(verts), std::move(tris), gammas,
                              MeshValidation::Structural, c.name());
}

// ---------------------------------------------------------------------------
// Hierarchy

MeshHierarchy::MeshHierarchy(Triangulation base) {
  levels_.push_back(std::move(base));
}

const Triangulation& MeshHierarchy::level(int j) const {
  if (j < 0 || j >= levels())
    throw std::out_of_range("mesh level " + std::to_string(j) + " not built");
  return levels_[j];
}

void MeshHierarchy::ensure_level(int j) {
  while (levels() <= j) levels_.push_back(refine(levels_.back()));
}

std::vector<int> p2_dofs(const Triangulation& mesh) {
  std::vector<int> out;
  for (int n = 0; n < mesh.p2_node_count(); ++n)
    if (!mesh.p2_node_on_gamma(n)) out.push_back(n);
  return out;
}

std::vector<int> node_index_set(const MeshHierarchy& h, int j, IndexClass which) {
  if (which == IndexClass::CoarseNodes) return p2_dofs(h.level(j));
  const Triangulation& fine = h.level(j + 1);
  const int nvf = fine.vertex_count();
  std::vector<int> out;
  for (int e = 0; e < fine.edge_count(); ++e)
    if (!fine.p2_node_on_gamma(nvf + e)) out.push_back(nvf + e);
  return out;
}

Rat patch_volume(const MeshHierarchy& h, int j, int fine_node) {
  const Triangulation& coarse = h.level(j);
  const Triangulation& fine = h.level(j + 1);
  const int nvc = coarse.vertex_count();
  const int nvf = fine.vertex_count();
  if (fine_node < 0 || fine_node >= fine.p2_node_count())
    throw std::out_of_range(fine.name() + ": invalid P2 node id " +
                            std::to_string(fine_node));
  Rat vol = 0;
  if (fine_node < nvc) {
    for (int t : coarse.vertex_triangles(fine_node)) vol += coarse.volume(t);
  } else if (fine_node < nvf) {
    for (int t : coarse.edge_triangles(fine_node - nvc)) vol += coarse.volume(t);
  } else {
    int parents[2] = {-1, -1};
    int np = 0;
    for (int t : fine.edge_triangles(fine_node - nvf)) {
      const int p = t / 4;
      if (np == 0 || parents[0] != p) parents[np++] = p;
    }
    for (int k = 0; k < np; ++k) vol += coarse.volume(parents[k]);
  }
  return vol;
}

double scaling_factor(const MeshHierarchy& h, int j, int fine_node) {
  return 1.0 / std::sqrt(to_double(patch_volume(h, j, fine_node)));
}

std::array<int, 6> coarse6_nodes(const Triangulation& mesh, int t) {
  const auto& tri = mesh.triangle(t);
  const int nv = mesh.vertex_count();
  return {tri[0], tri[1], tri[2], nv + mesh.tri_edge(t, 0), nv + mesh.tri_edge(t, 1),
          nv + mesh.tri_edge(t, 2)};
}

std::array<int, 15> coarse_fine15_nodes(const MeshHierarchy& h, int j, int t) {
  const Triangulation& coarse = h.level(j);
  const Triangulation& fine = h.level(j + 1);
  const int nvc = coarse.vertex_count();
  const int nvf = fine.vertex_count();
  const auto& tri = coarse.triangle(t);

  std::array<int, 15> out{};
  std::array<int, 3> mid{};
  for (int k = 0; k < 3; ++k) {
    out[k] = tri[k];
    mid[k] = nvc + coarse.tri_edge(t, k);
    out[3 + k] = mid[k];
  }
  auto fine_mid = [&](int u, int v) {
    const int e = fine.edge_id(u, v);
    if (e < 0)
      throw std::logic_error("refinement is missing the expected fine edge " +
                             edge_str(u, v));
    return nvf + e;
  };
  for (int k = 0; k < 3; ++k) {
    const int i = (k + 1) % 3, j2 = (k + 2) % 3;
    out[6 + 2 * k] = fine_mid(tri[i], mid[k]);      // quarter near vertex i
    out[6 + 2 * k + 1] = fine_mid(tri[j2], mid[k]);  // quarter near vertex j2
  }
  for (int k = 0; k < 3; ++k) {
    const int i = (k + 1) % 3, j2 = (k + 2) % 3;
    out[12 + k] = fine_mid(mid[i], mid[j2]);  // interior point nearest vertex k
  }
  return out;
}

}  // namespace femwave
