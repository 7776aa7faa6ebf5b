#include "femwave/assembly.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace femwave {

int GlobalCollection::find_node(int node) const {
  auto it = std::lower_bound(index_nodes.begin(), index_nodes.end(), node);
  if (it == index_nodes.end() || *it != node) return -1;
  return static_cast<int>(it - index_nodes.begin());
}

GlobalCollection assemble(const MeshHierarchy& h, int j,
                          const LocalCollection& local, std::string label) {
  const Triangulation& coarse = h.level(j);
  const Triangulation& fine = h.level(j + 1);
  const auto& n15 = nodes15();
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(label + " (level " + std::to_string(j) + "): " + what);
  };

  // Local index point -> canonical fine-node slot.
  std::vector<int> slot_of(local.size(), -1);
  for (int i = 0; i < local.size(); ++i) {
    for (int m = 0; m < 15; ++m)
      if (n15[m] == local.index[i]) slot_of[i] = m;
    if (slot_of[i] < 0) fail("local index point is not a canonical node");
  }
  // Per-function nodal traces on the fifteen fine nodes.
  std::vector<std::vector<Rat>> traces(local.size());
  for (int i = 0; i < local.size(); ++i) traces[i] = values_at_fine_nodes(local.fn[i]);

  GlobalCollection g;
  g.label = label;  // fail() still needs the name below
  g.level = j;
  g.local = local;

  // First pass: collect index nodes (deduplicated, ascending).
  std::set<int> nodes;
  for (int t = 0; t < coarse.triangle_count(); ++t) {
    const auto ids = coarse_fine15_nodes(h, j, t);
    for (int i = 0; i < local.size(); ++i) {
      const int node = ids[slot_of[i]];
      if (!fine.p2_node_on_gamma(node)) nodes.insert(node);
    }
  }
  g.index_nodes.assign(nodes.begin(), nodes.end());
  for (int node : g.index_nodes) g.patch_vol.push_back(patch_volume(h, j, node));

  // Second pass: element tables plus consistent nodal traces.
  std::vector<std::map<int, Rat>> values(g.size());
  g.elements.assign(coarse.triangle_count(), {});
  g.tri_volume.reserve(coarse.triangle_count());
  for (int t = 0; t < coarse.triangle_count(); ++t)
    g.tri_volume.push_back(coarse.volume(t));
  for (int t = 0; t < coarse.triangle_count(); ++t) {
    const auto ids = coarse_fine15_nodes(h, j, t);
    for (int i = 0; i < local.size(); ++i) {
      const int node = ids[slot_of[i]];
      if (fine.p2_node_on_gamma(node)) continue;
      const int gf = g.find_node(node);
      g.elements[t].push_back(ElementEntry{i, gf});
      for (int m = 0; m < 15; ++m) {
        const Rat& v = traces[i][m];
        if (v == 0) continue;
        const int vn = ids[m];
        if (fine.p2_node_on_gamma(vn))
          fail("function at node " + std::to_string(node) +
               " has a nonzero trace on the boundary-condition set");
        auto [it, fresh] = values[gf].emplace(vn, v);
        if (!fresh && it->second != v)
          fail("inconsistent nodal trace at node " + std::to_string(vn) +
               " for the function at node " + std::to_string(node));
      }
    }
  }
  g.nodal_values.resize(g.size());
  for (int f = 0; f < g.size(); ++f)
    g.nodal_values[f].assign(values[f].begin(), values[f].end());
  return g;
}

bool FactoredGram::is_identity() const {
  if (!identical_index || rows != cols) return false;
  int diag_seen = 0;
  for (const auto& [key, v] : R) {
    if (v == 0) continue;
    if (key.first != key.second) return false;
    if (v != pv_row[key.first]) return false;
    ++diag_seen;
  }
  return diag_seen == rows;
}

bool FactoredGram::is_zero() const {
  for (const auto& [key, v] : R)
    if (v != 0) return false;
  return true;
}

Eigen::SparseMatrix<double> FactoredGram::to_sparse() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(R.size());
  for (const auto& [key, v] : R) {
    if (v == 0) continue;
    const double s =
        std::sqrt(to_double(pv_row[key.first]) * to_double(pv_col[key.second]));
    trip.emplace_back(key.first, key.second, to_double(v) / s);
  }
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::MatrixXd FactoredGram::to_dense() const {
  return Eigen::MatrixXd(to_sparse());
}

FactoredGram global_gram(const GlobalCollection& A, const GlobalCollection& B) {
  if (A.level != B.level)
    throw std::invalid_argument("global_gram: collections live on different levels");
  FactoredGram fg;
  fg.rows = A.size();
  fg.cols = B.size();
  fg.pv_row = A.patch_vol;
  fg.pv_col = B.patch_vol;
  fg.identical_index = A.index_nodes == B.index_nodes && A.patch_vol == B.patch_vol;

  if (A.elements.size() != B.elements.size())
    throw std::invalid_argument("global_gram: collections live on different meshes");
  const RatMat ref = gram(A.local, B.local);
  const int nt = static_cast<int>(A.elements.size());
  for (int t = 0; t < nt; ++t) {
    const Rat& vol = A.tri_volume[t];
    for (const auto& ea : A.elements[t])
      for (const auto& eb : B.elements[t]) {
        const Rat& r = ref(ea.local_fn, eb.local_fn);
        if (r == 0) continue;
        fg.R[std::make_pair(ea.global_fn, eb.global_fn)] += vol * r;
      }
  }
  return fg;
}

std::array<Rat, 3> integrate_moments(const Triangulation& mesh,
                                     const std::vector<std::pair<int, Rat>>& nodal) {
  std::map<int, Rat> val(nodal.begin(), nodal.end());
  std::set<int> tris;
  const int nv = mesh.vertex_count();
  for (const auto& [node, v] : nodal) {
    if (v == 0) continue;
    const auto& tl =
        node < nv ? mesh.vertex_triangles(node) : mesh.edge_triangles(node - nv);
    tris.insert(tl.begin(), tl.end());
  }
  const RatMat& mixed = quadratic_linear_mass();
  std::array<Rat, 3> mom{Rat(0), Rat(0), Rat(0)};
  for (int t : tris) {
    const auto n6 = coarse6_nodes(mesh, t);
    std::array<Rat, 6> v{};
    for (int k = 0; k < 6; ++k) {
      auto it = val.find(n6[k]);
      if (it != val.end()) v[k] = it->second;
    }
    const Rat& vol = mesh.volume(t);
    mom[0] += vol * (v[3] + v[4] + v[5]) / 3;
    const auto& tri = mesh.triangle(t);
    Rat mx(0), my(0);
    for (int i = 0; i < 6; ++i) {
      if (v[i] == 0) continue;
      for (int k = 0; k < 3; ++k) {
        const Rat w = v[i] * mixed(i, k);
        mx += w * mesh.vertex(tri[k]).x;
        my += w * mesh.vertex(tri[k]).y;
      }
    }
    mom[1] += vol * mx;
    mom[2] += vol * my;
  }
  return mom;
}

double infsup_bound(const GlobalCollection& A, const GlobalCollection& B,
                    int max_dense) {
  if (A.size() > max_dense || B.size() > max_dense)
    throw std::runtime_error(
        "infsup_bound: collections too large for dense evaluation (" +
        std::to_string(A.size()) + "x" + std::to_string(B.size()) + ", cap " +
        std::to_string(max_dense) + ")");
  const Eigen::MatrixXd gab = global_gram(A, B).to_dense();
  const Eigen::MatrixXd gaa = global_gram(A, A).to_dense();
  const Eigen::MatrixXd gbb = global_gram(B, B).to_dense();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gab);
  const double smin = svd.singularValues().tail(1)(0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(gaa), eb(gbb);
  return smin / std::sqrt(ea.eigenvalues().maxCoeff() * eb.eigenvalues().maxCoeff());
}

}  // namespace femwave
