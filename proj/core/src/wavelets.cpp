#include "femwave/wavelets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "femwave/ref_element.hpp"

namespace femwave {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(what);
}

// Classification of a detail node (an off-Gamma P2 edge node of the fine
// mesh) relative to the coarse mesh.
struct DetailInfo {
  WaveletKind kind = WaveletKind::Edge;
  int anchor = -1;       // nearby coarse vertex
  int coarse_edge = -1;  // edge kind: coarse edge carrying the quarter point
  int home_tri = -1;     // interior kind: owning coarse triangle
};

DetailInfo classify_detail(const Triangulation& coarse,
                           const Triangulation& fine, int node) {
  const int nvc = coarse.vertex_count();
  const int nvf = fine.vertex_count();
  if (node < nvf) fail(fine.name() + ": detail node is not an edge node");
  const auto [u, v] = fine.edge(node - nvf);
  DetailInfo info;
  if (u < nvc) {
    // Fine edge from a coarse vertex to the midpoint of a coarse edge: the
    // node is the quarter point of that coarse edge next to vertex u.
    if (v < nvc) fail(fine.name() + ": fine edge joins two coarse vertices");
    info.kind = WaveletKind::Edge;
    info.anchor = u;
    info.coarse_edge = v - nvc;
    return info;
  }
  // Fine edge between two coarse-edge midpoints: the node is an interior
  // point of the coarse triangle shared by those two edges.
  const int eu = u - nvc;
  const int ev = v - nvc;
  info.kind = WaveletKind::Interior;
  for (int tu : coarse.edge_triangles(eu))
    for (int tv : coarse.edge_triangles(ev))
      if (tu == tv) info.home_tri = tu;
  if (info.home_tri < 0) fail(coarse.name() + ": interior node without owner");
  const auto [a, b] = coarse.edge(eu);
  const auto [c, d] = coarse.edge(ev);
  if (a == c || a == d) info.anchor = a;
  else if (b == c || b == d) info.anchor = b;
  else fail(coarse.name() + ": interior node edges share no vertex");
  return info;
}

std::vector<int> dof_map(const Triangulation& mesh) {
  std::vector<int> map(mesh.p2_node_count(), -1);
  const auto dofs = p2_dofs(mesh);
  for (int i = 0; i < static_cast<int>(dofs.size()); ++i) map[dofs[i]] = i;
  return map;
}

Eigen::SparseMatrix<double> horzcat(const Eigen::SparseMatrix<double>& a,
                                    const Eigen::SparseMatrix<double>& b) {
  if (a.rows() != b.rows()) fail("horzcat: row mismatch");
  Eigen::SparseMatrix<double> out(a.rows(), a.cols() + b.cols());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(a.nonZeros() + b.nonZeros()));
  for (int k = 0; k < a.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < b.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(b, k); it; ++it)
      trips.emplace_back(it.row(), static_cast<int>(a.cols() + it.col()),
                         it.value());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

double WaveletLevel::mu(int f) const {
  return 1.0 / std::sqrt(to_double(patch_vol.at(f)));
}

WaveletLevel build_wavelets(MeshHierarchy& h, int j) {
  h.ensure_level(j + 1);
  const RefElement& re = RefElement::instance();
  const Triangulation& coarse = h.level(j);
  const Triangulation& fine = h.level(j + 1);
  const int nvc = coarse.vertex_count();

  const GlobalCollection theta = assemble(h, j, re.Theta(), "Theta");
  const GlobalCollection phit = assemble(h, j, re.PhiTilde(), "PhiTilde");
  const GlobalCollection xi = assemble(h, j, re.Xi(), "Xi");
  if (theta.index_nodes != phit.index_nodes)
    fail(coarse.name() + ": coarse and dual index sets differ");
  if (!global_gram(theta, phit).is_identity())
    fail(coarse.name() + ": coarse/dual pairing is not the identity at level " +
         std::to_string(j));

  const FactoredGram cross = global_gram(xi, phit);

  WaveletLevel w;
  w.level = j + 1;
  w.index_nodes = xi.index_nodes;
  w.patch_vol = xi.patch_vol;
  w.kind.resize(xi.size());
  w.n_corrections.assign(xi.size(), 0);
  w.anchor_vertex.resize(xi.size());
  w.nodal_values.resize(xi.size());

  for (int y = 0; y < xi.size(); ++y) {
    const DetailInfo info = classify_detail(coarse, fine, xi.index_nodes[y]);
    w.kind[y] = info.kind;
    w.anchor_vertex[y] = info.anchor;

    std::map<int, Rat> acc;
    for (const auto& [node, val] : xi.nodal_values[y]) acc[node] = val;

    // Allowed correction targets, as coarse P2 node ids (anchor vertex, and
    // for the interior kind also the midpoint of the opposite edge).
    std::set<int> allowed = {info.anchor};
    if (info.kind == WaveletKind::Interior) {
      const auto& tri = coarse.triangle(info.home_tri);
      for (int k = 0; k < 3; ++k)
        if (tri[k] == info.anchor)
          allowed.insert(nvc + coarse.tri_edge(info.home_tri, k));
    }

    const auto lo = cross.R.lower_bound({y, std::numeric_limits<int>::min()});
    const auto hi = cross.R.upper_bound({y, std::numeric_limits<int>::max()});
    for (auto it = lo; it != hi; ++it) {
      const int x = it->first.second;
      if (allowed.find(theta.index_nodes[x]) == allowed.end())
        fail(coarse.name() + ": unexpected correction target for detail node " +
             std::to_string(xi.index_nodes[y]));
      const Rat c = it->second / cross.pv_col[x];
      for (const auto& [node, val] : theta.nodal_values[x]) acc[node] -= c * val;
      ++w.n_corrections[y];
    }
    const int max_corrections = info.kind == WaveletKind::Edge ? 1 : 2;
    if (w.n_corrections[y] > max_corrections)
      fail(coarse.name() + ": too many corrections for detail node " +
           std::to_string(xi.index_nodes[y]));

    auto& nodal = w.nodal_values[y];
    for (const auto& [node, val] : acc)
      if (val != 0) nodal.emplace_back(node, val);
  }
  return w;
}

SupportReport check_supports(const MeshHierarchy& h, int j,
                             const WaveletLevel& w) {
  const Triangulation& coarse = h.level(j);
  const Triangulation& fine = h.level(j + 1);
  SupportReport rep;
  for (int y = 0; y < w.size(); ++y) {
    const DetailInfo info = classify_detail(coarse, fine, w.index_nodes[y]);

    std::vector<int> home;
    if (info.kind == WaveletKind::Edge)
      home = coarse.edge_triangles(info.coarse_edge);
    else
      home = {info.home_tri};

    // One-ring star of the home triangles: every coarse triangle touching a
    // vertex of a home triangle. The wavelet must not reach beyond it.
    std::set<int> star;
    for (int t : home)
      for (int v : coarse.triangle(t))
        for (int s : coarse.vertex_triangles(v)) star.insert(s);
    std::set<int> allowed_nodes;
    for (int t : star)
      for (int n : coarse_fine15_nodes(h, j, t)) allowed_nodes.insert(n);

    const int count = w.support_nodes(y);
    const int bound = (info.kind == WaveletKind::Edge ? 7 : 9) +
                      coarse.valence(info.anchor);
    if (info.kind == WaveletKind::Edge) {
      rep.max_edge_nodes = std::max(rep.max_edge_nodes, count);
      rep.max_edge_bound = std::max(rep.max_edge_bound, bound);
    } else {
      rep.max_interior_nodes = std::max(rep.max_interior_nodes, count);
      rep.max_interior_bound = std::max(rep.max_interior_bound, bound);
    }
    if (count > bound) rep.within_bounds = false;
    for (const auto& [node, val] : w.nodal_values[y])
      if (allowed_nodes.find(node) == allowed_nodes.end())
        rep.within_bounds = false;
  }
  return rep;
}

bool support_avoids_gamma(const Triangulation& mesh,
                          const std::vector<std::pair<int, Rat>>& nodal) {
  const int nv = mesh.vertex_count();
  std::set<int> tris;
  for (const auto& [node, val] : nodal) {
    const auto& owners = node < nv ? mesh.vertex_triangles(node)
                                   : mesh.edge_triangles(node - nv);
    tris.insert(owners.begin(), owners.end());
  }
  for (int t : tris)
    for (int v : mesh.triangle(t))
      if (mesh.p2_node_on_gamma(v)) return false;
  return true;
}

MultilevelTransform::MultilevelTransform(MeshHierarchy& h, int levels)
    : J_(levels) {
  if (levels < 0) fail("transform level count must be non-negative");
  h.ensure_level(std::max(1, levels));
  const RefElement& re = RefElement::instance();

  const auto dofs0 = p2_dofs(h.level(0));
  space_dim_.push_back(static_cast<int>(dofs0.size()));
  mu0_.resize(dofs0.size());
  for (int i = 0; i < static_cast<int>(dofs0.size()); ++i)
    mu0_[i] = scaling_factor(h, 0, dofs0[i]);

  for (int j = 0; j < J_; ++j) {
    wl_.push_back(build_wavelets(h, j));
    const WaveletLevel& w = wl_.back();
    const auto fmap = dof_map(h.level(j + 1));
    const int nf = static_cast<int>(p2_dofs(h.level(j + 1)).size());
    const int nc = space_dim_[j];
    if (nf != nc + w.size())
      fail(h.level(j).name() + ": dimension mismatch between levels " +
           std::to_string(j) + " and " + std::to_string(j + 1));

    const GlobalCollection Nc = assemble(h, j, re.N(), "N");
    if (Nc.size() != nc) fail("prolongation source dimension mismatch");
    std::vector<Eigen::Triplet<double>> tp;
    for (int f = 0; f < Nc.size(); ++f)
      for (const auto& [node, val] : Nc.nodal_values[f])
        tp.emplace_back(fmap[node], f, to_double(val));
    Sparse P(nf, nc);
    P.setFromTriplets(tp.begin(), tp.end());
    prolong_.push_back(std::move(P));

    std::vector<Eigen::Triplet<double>> td;
    for (int f = 0; f < w.size(); ++f) {
      const double mu = w.mu(f);
      for (const auto& [node, val] : w.nodal_values[f])
        td.emplace_back(fmap[node], f, mu * to_double(val));
    }
    Sparse D(nf, w.size());
    D.setFromTriplets(td.begin(), td.end());
    detail_.push_back(std::move(D));

    space_dim_.push_back(nf);
  }
  lu_.resize(J_);
}

int MultilevelTransform::block_offset(int j) const {
  if (j < 0 || j > J_) fail("block_offset: level out of range");
  int off = 0;
  if (j >= 1) {
    off = space_dim_[0];
    for (int i = 1; i < j; ++i) off += detail_dim(i);
  }
  return off;
}

Eigen::SparseLU<MultilevelTransform::Sparse>& MultilevelTransform::lu(
    int j) const {
  auto& slot = lu_.at(j - 1);
  if (!slot) {
    const Sparse S = horzcat(prolong_[j - 1], detail_[j - 1]);
    slot = std::make_unique<Eigen::SparseLU<Sparse>>();
    slot->compute(S);
    if (slot->info() != Eigen::Success)
      fail("two-level transform is singular at level " + std::to_string(j));
  }
  return *slot;
}

Eigen::MatrixXd MultilevelTransform::synthesis(
    const Eigen::MatrixXd& coeffs) const {
  if (coeffs.rows() != coeff_dim()) fail("synthesis: wrong coefficient size");
  Eigen::MatrixXd u =
      mu0_.asDiagonal() * coeffs.topRows(space_dim_[0]);
  for (int j = 1; j <= J_; ++j)
    u = prolong_[j - 1] * u +
        detail_[j - 1] * coeffs.middleRows(block_offset(j), detail_dim(j));
  return u;
}

Eigen::MatrixXd MultilevelTransform::analysis(
    const Eigen::MatrixXd& nodal) const {
  if (nodal.rows() != space_dim_.back()) fail("analysis: wrong nodal size");
  Eigen::MatrixXd out(coeff_dim(), nodal.cols());
  Eigen::MatrixXd x = nodal;
  for (int j = J_; j >= 1; --j) {
    const Eigen::MatrixXd z = lu(j).solve(x);
    if (lu(j).info() != Eigen::Success)
      fail("analysis solve failed at level " + std::to_string(j));
    out.middleRows(block_offset(j), detail_dim(j)) = z.bottomRows(detail_dim(j));
    x = z.topRows(space_dim_[j - 1]);
  }
  out.topRows(space_dim_[0]) = mu0_.cwiseInverse().asDiagonal() * x;
  return out;
}

Eigen::MatrixXd MultilevelTransform::synthesis_transpose(
    const Eigen::MatrixXd& nodal) const {
  if (nodal.rows() != space_dim_.back())
    fail("synthesis_transpose: wrong nodal size");
  Eigen::MatrixXd out(coeff_dim(), nodal.cols());
  Eigen::MatrixXd v = nodal;
  for (int j = J_; j >= 1; --j) {
    out.middleRows(block_offset(j), detail_dim(j)) =
        detail_[j - 1].transpose() * v;
    v = prolong_[j - 1].transpose() * v;
  }
  out.topRows(space_dim_[0]) = mu0_.asDiagonal() * v;
  return out;
}

Eigen::MatrixXd MultilevelTransform::analysis_transpose(
    const Eigen::MatrixXd& coeffs) const {
  if (coeffs.rows() != coeff_dim())
    fail("analysis_transpose: wrong coefficient size");
  Eigen::MatrixXd v =
      mu0_.cwiseInverse().asDiagonal() * coeffs.topRows(space_dim_[0]);
  for (int j = 1; j <= J_; ++j) {
    Eigen::MatrixXd rhs(space_dim_[j], coeffs.cols());
    rhs << v, coeffs.middleRows(block_offset(j), detail_dim(j));
    v = lu(j).transpose().solve(rhs);
  }
  return v;
}

Eigen::VectorXd MultilevelTransform::synthesis(
    const Eigen::VectorXd& coeffs) const {
  return synthesis(Eigen::MatrixXd(coeffs));
}

Eigen::VectorXd MultilevelTransform::analysis(
    const Eigen::VectorXd& nodal) const {
  return analysis(Eigen::MatrixXd(nodal));
}

Eigen::VectorXd MultilevelTransform::synthesis_transpose(
    const Eigen::VectorXd& nodal) const {
  return synthesis_transpose(Eigen::MatrixXd(nodal));
}

Eigen::VectorXd MultilevelTransform::analysis_transpose(
    const Eigen::VectorXd& coeffs) const {
  return analysis_transpose(Eigen::MatrixXd(coeffs));
}

Eigen::SparseMatrix<double> MultilevelTransform::matrix() const {
  Sparse W(space_dim_[0], space_dim_[0]);
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < space_dim_[0]; ++i) trips.emplace_back(i, i, mu0_[i]);
    W.setFromTriplets(trips.begin(), trips.end());
  }
  for (int j = 1; j <= J_; ++j) {
    const Sparse PW = prolong_[j - 1] * W;
    W = horzcat(PW, detail_[j - 1]);
  }
  return W;
}

TwoLevelDual dual_two_level(MeshHierarchy& h, int j, int max_dense) {
  h.ensure_level(j + 1);
  const RefElement& re = RefElement::instance();
  const GlobalCollection theta = assemble(h, j, re.Theta(), "Theta");
  const GlobalCollection phit = assemble(h, j, re.PhiTilde(), "PhiTilde");
  const GlobalCollection xi = assemble(h, j, re.Xi(), "Xi");
  if (!global_gram(theta, phit).is_identity())
    fail(h.level(j).name() + ": coarse/dual pairing is not the identity");

  const auto fine_dofs = p2_dofs(h.level(j + 1));
  const int n1 = static_cast<int>(fine_dofs.size());
  const int n0 = theta.size();
  const int m = xi.size();
  if (n1 != n0 + m) fail("two-level dimension mismatch");
  if (n1 > max_dense)
    fail("two-level dual transform needs " + std::to_string(n1) +
         " rows, above the dense cap of " + std::to_string(max_dense));
  const auto fmap = dof_map(h.level(j + 1));

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n1, n1);
  for (int x = 0; x < n0; ++x) {
    const double mu = theta.mu(x);
    for (const auto& [node, val] : theta.nodal_values[x])
      A(fmap[node], x) = mu * to_double(val);
  }
  for (int y = 0; y < m; ++y) {
    const double mu = xi.mu(y);
    for (const auto& [node, val] : xi.nodal_values[y])
      A(fmap[node], n0 + y) = mu * to_double(val);
  }

  const FactoredGram cross = global_gram(xi, phit);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n0, m);
  for (const auto& [key, val] : cross.R) {
    const auto [y, x] = key;
    C(x, y) = to_double(val) /
              std::sqrt(to_double(cross.pv_row[y] * cross.pv_col[x]));
  }

  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n1, n1);
  B.topRightCorner(n0, m) = -C;
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n1, n1);
  L.bottomLeftCorner(m, n0) = C.transpose();

  TwoLevelDual out;
  out.n_coarse = n0;
  out.forward = A * B;
  out.dual = A.transpose().partialPivLu().solve(L);
  return out;
}

SingularRange whitened_singular_range(const Eigen::MatrixXd& GA,
                                      const Eigen::MatrixXd& GAB,
                                      const Eigen::MatrixXd& GB) {
  Eigen::LLT<Eigen::MatrixXd> la(GA);
  Eigen::LLT<Eigen::MatrixXd> lb(GB);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success)
    fail("whitened_singular_range: Gram matrix not positive definite");
  Eigen::MatrixXd T = la.matrixL().solve(GAB);
  T = lb.matrixL().solve(T.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T);
  const auto& sv = svd.singularValues();
  return {sv[sv.size() - 1], sv[0]};
}

AngleConstants angle_constants(MeshHierarchy& h, int j, int max_dense) {
  h.ensure_level(j + 1);
  const RefElement& re = RefElement::instance();
  const GlobalCollection theta = assemble(h, j, re.Theta(), "Theta");
  const GlobalCollection dual = assemble(h, j, re.Ntilde(), "Ntilde");
  const GlobalCollection xi = assemble(h, j, re.Xi(), "Xi");
  if (std::max({theta.size(), dual.size(), xi.size()}) > max_dense)
    fail("angle constants need dense Grams above the cap of " +
         std::to_string(max_dense));
  const Eigen::MatrixXd Gt = global_gram(theta, theta).to_dense();
  const Eigen::MatrixXd Gd = global_gram(dual, dual).to_dense();
  const Eigen::MatrixXd Gx = global_gram(xi, xi).to_dense();
  const Eigen::MatrixXd Gtd = global_gram(theta, dual).to_dense();
  const Eigen::MatrixXd Gtx = global_gram(theta, xi).to_dense();
  AngleConstants out;
  out.delta = whitened_singular_range(Gt, Gtd, Gd).smallest;
  out.epsilon = whitened_singular_range(Gt, Gtx, Gx).largest;
  return out;
}

AngleConstants local_angle_constants() {
  const RefElement& re = RefElement::instance();
  const Eigen::MatrixXd Gt = gram(re.Theta(), re.Theta()).to_double();
  const Eigen::MatrixXd Gd = gram(re.Ntilde(), re.Ntilde()).to_double();
  const Eigen::MatrixXd Gx = gram(re.Xi(), re.Xi()).to_double();
  const Eigen::MatrixXd Gtd = gram(re.Theta(), re.Ntilde()).to_double();
  const Eigen::MatrixXd Gtx = gram(re.Theta(), re.Xi()).to_double();
  AngleConstants out;
  out.delta = whitened_singular_range(Gt, Gtd, Gd).smallest;
  out.epsilon = whitened_singular_range(Gt, Gtx, Gx).largest;
  return out;
}

}  // namespace femwave
