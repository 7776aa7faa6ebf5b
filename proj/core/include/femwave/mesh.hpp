// Conforming triangulations of polygonal domains with exact rational vertex
// coordinates, uniform red refinement, and the node bookkeeping used by the
// multilevel construction: quadratic (P2) nodes of a mesh are the vertices of
// its refinement, with identical ids.
#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "femwave/rational.hpp"
#include "femwave/ref_element.hpp"

namespace femwave {

struct Vec2R {
  Rat x, y;
  bool operator==(const Vec2R& o) const { return x == o.x && y == o.y; }
};

// Errors raised while loading or validating a mesh; the message carries the
// input name plus a line number or entity id.
class MeshError : public std::runtime_error {
 public:
  explicit MeshError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class MeshValidation {
  Structural,  // index ranges, orientation, edge manifoldness, dangling vertices
  Full,        // Structural + duplicate vertices + hanging (T-)vertices
};

class Triangulation {
 public:
  static Triangulation build(std::vector<Vec2R> vertices,
                             std::vector<std::array<int, 3>> triangles,
                             const std::vector<std::pair<int, int>>& gamma_edges,
                             MeshValidation validation, const std::string& name);

  const std::string& name() const { return name_; }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const Vec2R& vertex(int v) const { return vertices_[v]; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  // Endpoints of edge e as a sorted pair of vertex ids.
  const std::pair<int, int>& edge(int e) const { return edges_[e]; }
  // Edge id for an unordered vertex pair, -1 when absent.
  int edge_id(int u, int v) const;
  // Edge of triangle t opposite its local vertex k.
  int tri_edge(int t, int k) const { return tri_edges_[t][k]; }

  const std::vector<int>& edge_triangles(int e) const { return edge_tris_[e]; }
  const std::vector<int>& vertex_triangles(int v) const { return vertex_tris_[v]; }
  int valence(int v) const { return static_cast<int>(vertex_tris_[v].size()); }

  bool is_boundary_edge(int e) const { return edge_tris_[e].size() == 1; }
  bool is_gamma_edge(int e) const { return gamma_edge_[e]; }
  bool is_gamma_vertex(int v) const { return gamma_vertex_[v]; }

  const Rat& volume(int t) const { return volume_[t]; }
  const Rat& total_volume() const { return total_volume_; }

  // P2 nodes: vertex v has node id v; edge e has node id vertex_count()+e.
  int p2_node_count() const { return vertex_count() + edge_count(); }
  Vec2R p2_node_point(int n) const;
  bool p2_node_on_gamma(int n) const;

  // Barycentric coordinates of a P2 node with respect to triangle t, or
  // nothing when the node does not lie on t (combinatorial, exact).
  bool p2_node_in_triangle(int n, int t, Bary* bary) const;

 private:
  std::string name_;
  std::vector<Vec2R> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<std::pair<int, int>> edges_;
  std::map<std::pair<int, int>, int> edge_ids_;
  std::vector<std::array<int, 3>> tri_edges_;
  std::vector<std::vector<int>> edge_tris_;
  std::vector<std::vector<int>> vertex_tris_;
  std::vector<bool> gamma_edge_, gamma_vertex_;
  std::vector<Rat> volume_;
  Rat total_volume_;
};

// Reads the `femwave-mesh 1` format:
//   femwave-mesh 1
//   v <x> <y>        vertex (decimal or p/q rationals)
//   t <i> <j> <k>    triangle, 0-based vertex ids
//   g <i> <j>        boundary-condition edge by vertex ids
// Blank lines and lines starting with '#' are ignored. Throws MeshError with
// the offending line number or entity id.
Triangulation load_mesh(std::istream& in, const std::string& name);
Triangulation load_mesh_file(const std::string& path);

// Uniform red refinement: every triangle is split into four by its edge
// midpoints. Vertex ids are preserved; the midpoint of coarse edge e becomes
// vertex (coarse vertex_count + e), so coarse P2 node ids equal fine vertex
// ids. Children of triangle t are 4t..4t+3: the corner child at each vertex
// (in vertex order), then the central child. Boundary-condition edges are
// inherited by their two halves.
Triangulation refine(const Triangulation& coarse);

class MeshHierarchy {
 public:
  explicit MeshHierarchy(Triangulation base);

  // Number of levels currently built (level ids 0..levels()-1).
  int levels() const { return static_cast<int>(levels_.size()); }
  const Triangulation& level(int j) const;
  // Builds refinements until level j exists.
  void ensure_level(int j);

 private:
  std::vector<Triangulation> levels_;
};

enum class IndexClass {
  CoarseNodes,  // P2 nodes of level j (= vertices of level j+1) off Gamma
  DetailNodes,  // edge nodes of level j+1 (quarter and interior points) off Gamma
};

// P2 node ids of the mesh that are not on Gamma, ascending. These index the
// nodal degrees of freedom of the quadratic space on this mesh.
std::vector<int> p2_dofs(const Triangulation& mesh);

// Index sets for the level-j collections, as level-(j+1) P2 node ids
// (coarse nodes double as level-j P2 node ids). DetailNodes requires level
// j+1 built; CoarseNodes only level j.
std::vector<int> node_index_set(const MeshHierarchy& h, int j, IndexClass which);

// Volume of the level-j patch of triangles whose closure contains the given
// level-(j+1) P2 node. Throws std::out_of_range for an invalid node id.
Rat patch_volume(const MeshHierarchy& h, int j, int fine_node);

// Normalization mu(x; T_j) = patch_volume^{-1/2}.
double scaling_factor(const MeshHierarchy& h, int j, int fine_node);

// Level-(j+1) P2 node ids at the fifteen canonical reference nodes of coarse
// triangle t (vertices, opposite-edge midpoints, quarter points, interior
// points), matching nodes15() order.
std::array<int, 15> coarse_fine15_nodes(const MeshHierarchy& h, int j, int t);

// Level-j P2 node ids at the six canonical reference nodes of triangle t.
std::array<int, 6> coarse6_nodes(const Triangulation& mesh, int t);

}  // namespace femwave
