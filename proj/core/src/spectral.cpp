#include "femwave/spectral.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

#include "femwave/ref_element.hpp"

namespace femwave {

namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

std::vector<int> p2_dof_map(const Triangulation& mesh) {
  std::vector<int> map(mesh.p2_node_count(), -1);
  int next = 0;
  for (int n = 0; n < mesh.p2_node_count(); ++n)
    if (!mesh.p2_node_on_gamma(n)) map[n] = next++;
  return map;
}

std::vector<int> vertex_dof_map(const Triangulation& mesh) {
  std::vector<int> map(mesh.vertex_count(), -1);
  int next = 0;
  for (int v = 0; v < mesh.vertex_count(); ++v)
    if (!mesh.p2_node_on_gamma(v)) map[v] = next++;
  return map;
}

struct Vec2 {
  double x, y;
};

// Gradients of the barycentric coordinates: grad lambda_k is the rotated
// opposite edge divided by twice the signed area.
std::array<Vec2, 3> bary_gradients(const Triangulation& mesh, int t) {
  std::array<Vec2, 3> p;
  for (int k = 0; k < 3; ++k) {
    const Vec2R& v = mesh.vertex(mesh.triangle(t)[k]);
    p[k] = {to_double(v.x), to_double(v.y)};
  }
  const double s = (p[1].x - p[0].x) * (p[2].y - p[0].y) -
                   (p[1].y - p[0].y) * (p[2].x - p[0].x);
  std::array<Vec2, 3> g;
  for (int k = 0; k < 3; ++k) {
    const Vec2& a = p[(k + 1) % 3];
    const Vec2& b = p[(k + 2) % 3];
    g[k] = {-(b.y - a.y) / s, (b.x - a.x) / s};
  }
  return g;
}

// Gradients of the six quadratic nodal functions at barycentric lambda.
std::array<Vec2, 6> p2_gradients(const std::array<Vec2, 3>& g,
                                 const std::array<double, 3>& lambda) {
  std::array<Vec2, 6> out;
  for (int k = 0; k < 3; ++k) {
    const double c = 4.0 * lambda[k] - 1.0;
    out[k] = {c * g[k].x, c * g[k].y};
  }
  for (int k = 0; k < 3; ++k) {
    const int i = (k + 1) % 3;
    const int j = (k + 2) % 3;
    out[3 + k] = {4.0 * (lambda[j] * g[i].x + lambda[i] * g[j].x),
                  4.0 * (lambda[j] * g[i].y + lambda[i] * g[j].y)};
  }
  return out;
}

Sparse from_triplets(int rows, int cols, std::vector<Trip>& trips) {
  Sparse M(rows, cols);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

// Diagonal of W^T A W, one coefficient block at a time: coarsen A through the
// prolongations and dot the detail columns against it.
Eigen::VectorXd gram_diagonal(const MultilevelTransform& mt, const Sparse& A) {
  Eigen::VectorXd d(mt.coeff_dim());
  Sparse Aj = A;
  for (int j = mt.max_level(); j >= 1; --j) {
    const Sparse& Dj = mt.detail_columns(j);
    const Sparse AD = Aj * Dj;
    for (int c = 0; c < Dj.cols(); ++c)
      d[mt.block_offset(j) + c] = Dj.col(c).dot(AD.col(c));
    const Sparse& P = mt.prolongation(j - 1);
    Aj = Sparse(P.transpose() * Aj) * P;
  }
  const Eigen::VectorXd& mu0 = mt.level0_scaling();
  for (int i = 0; i < mt.space_dim(0); ++i)
    d[i] = mu0[i] * mu0[i] * Aj.coeff(i, i);
  return d;
}

Eigen::VectorXd inv_sqrt(const Eigen::VectorXd& d, const char* what) {
  if (d.size() > 0 && d.minCoeff() <= 0.0)
    throw std::runtime_error(std::string(what) +
                             ": Gram diagonal is not positive");
  return d.cwiseSqrt().cwiseInverse();
}

}  // namespace

Eigen::SparseMatrix<double> p2_mass(const Triangulation& mesh) {
  const auto dof = p2_dof_map(mesh);
  const int n = static_cast<int>(p2_dofs(mesh).size());
  const RatMat& M = quadratic_mass();
  std::vector<Trip> trips;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto n6 = coarse6_nodes(mesh, t);
    const double vol = to_double(mesh.volume(t));
    for (int i = 0; i < 6; ++i) {
      if (dof[n6[i]] < 0) continue;
      for (int k = 0; k < 6; ++k) {
        if (dof[n6[k]] < 0) continue;
        trips.emplace_back(dof[n6[i]], dof[n6[k]], vol * to_double(M(i, k)));
      }
    }
  }
  return from_triplets(n, n, trips);
}

Eigen::SparseMatrix<double> p2_stiffness(const Triangulation& mesh) {
  const auto dof = p2_dof_map(mesh);
  const int n = static_cast<int>(p2_dofs(mesh).size());
  // Midpoint quadrature is exact here: the integrand is quadratic.
  static const std::array<std::array<double, 3>, 3> kMidpoints = {
      {{0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}}};
  std::vector<Trip> trips;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto n6 = coarse6_nodes(mesh, t);
    const double vol = to_double(mesh.volume(t));
    const auto g = bary_gradients(mesh, t);
    std::array<std::array<double, 6>, 6> local{};
    for (const auto& q : kMidpoints) {
      const auto dg = p2_gradients(g, q);
      for (int i = 0; i < 6; ++i)
        for (int k = 0; k < 6; ++k)
          local[i][k] += (vol / 3.0) * (dg[i].x * dg[k].x + dg[i].y * dg[k].y);
    }
    for (int i = 0; i < 6; ++i) {
      if (dof[n6[i]] < 0) continue;
      for (int k = 0; k < 6; ++k)
        if (dof[n6[k]] >= 0)
          trips.emplace_back(dof[n6[i]], dof[n6[k]], local[i][k]);
    }
  }
  return from_triplets(n, n, trips);
}

Eigen::SparseMatrix<double> p1_stiffness(const Triangulation& mesh) {
  const auto dof = vertex_dof_map(mesh);
  const int n = *std::max_element(dof.begin(), dof.end()) + 1;
  std::vector<Trip> trips;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangle(t);
    const double vol = to_double(mesh.volume(t));
    const auto g = bary_gradients(mesh, t);
    for (int i = 0; i < 3; ++i) {
      if (dof[tri[i]] < 0) continue;
      for (int k = 0; k < 3; ++k)
        if (dof[tri[k]] >= 0)
          trips.emplace_back(dof[tri[i]], dof[tri[k]],
                             vol * (g[i].x * g[k].x + g[i].y * g[k].y));
    }
  }
  return from_triplets(n, n, trips);
}

Eigen::SparseMatrix<double> mixed_mass(const MeshHierarchy& h, int j) {
  const Triangulation& coarse = h.level(j);
  const Triangulation& fine = h.level(j + 1);
  const auto row_dof = p2_dof_map(coarse);
  const auto col_dof = vertex_dof_map(fine);
  const int n = static_cast<int>(p2_dofs(coarse).size());
  // The P2 nodes of the coarse mesh are the vertices of the fine one, with
  // the same ids and the same on-Gamma status; the pairing is square.
  if (static_cast<int>(col_dof.size()) != coarse.p2_node_count())
    throw std::runtime_error(coarse.name() + ": mixed pairing is not square");
  for (int i = 0; i < coarse.p2_node_count(); ++i)
    if (row_dof[i] != col_dof[i])
      throw std::runtime_error(coarse.name() + ": mixed pairing dof mismatch");

  const RatMat& G = RefElement::instance().gram_N_Ntilde();
  std::vector<Trip> trips;
  for (int t = 0; t < coarse.triangle_count(); ++t) {
    const auto n6 = coarse6_nodes(coarse, t);
    const double vol = to_double(coarse.volume(t));
    for (int i = 0; i < 6; ++i) {
      if (row_dof[n6[i]] < 0) continue;
      for (int k = 0; k < 6; ++k)
        if (col_dof[n6[k]] >= 0)
          trips.emplace_back(row_dof[n6[i]], col_dof[n6[k]],
                             vol * to_double(G(i, k)));
    }
  }
  return from_triplets(n, n, trips);
}

CondResult lanczos_condition(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, int n,
    double tol, std::uint64_t seed, int max_iters) {
  if (n <= 0) throw std::invalid_argument("lanczos: empty operator");
  max_iters = std::min(max_iters, n);

  std::mt19937_64 rng(seed);
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i)
    q[i] = 2.0 * (static_cast<double>(rng()) /
                  static_cast<double>(std::mt19937_64::max())) -
           1.0;
  q.normalize();

  std::vector<Eigen::VectorXd> Q = {q};
  std::vector<double> alpha, beta;
  CondResult res;
  res.converged = false;

  for (int k = 0; k < max_iters; ++k) {
    Eigen::VectorXd w = op(Q[k]);
    if (k > 0) w -= beta[k - 1] * Q[k - 1];
    const double a = Q[k].dot(w);
    alpha.push_back(a);
    w -= a * Q[k];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& qi : Q) w -= qi.dot(w) * qi;
    const double b = w.norm();

    const int m = k + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const auto& ev = es.eigenvalues();
    res.lambda_min = ev[0];
    res.lambda_max = ev[m - 1];
    res.iters = m;

    const double scale = std::max(std::abs(res.lambda_max), 1e-300);
    const double resid_min = b * std::abs(es.eigenvectors()(m - 1, 0));
    const double resid_max = b * std::abs(es.eigenvectors()(m - 1, m - 1));
    const bool tail_ok =
        resid_max <= tol * scale &&
        resid_min <= tol * std::max(std::abs(res.lambda_min), tol * scale);
    if (m == n || b <= 1e-14 * scale || tail_ok) {
      res.converged = true;
      break;
    }
    beta.push_back(b);
    Q.push_back(w / b);
  }
  res.kappa = res.lambda_max / res.lambda_min;
  return res;
}

CondResult dense_condition(const Eigen::MatrixXd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense eigensolver failed");
  CondResult res;
  res.lambda_min = es.eigenvalues()[0];
  res.lambda_max = es.eigenvalues()[G.rows() - 1];
  res.kappa = res.lambda_max / res.lambda_min;
  res.iters = static_cast<int>(G.rows());
  res.converged = true;
  return res;
}

NormKind parse_norm(const std::string& name) {
  if (name == "l2") return NormKind::L2;
  if (name == "h1") return NormKind::H1;
  if (name == "h1dual") return NormKind::H1Dual;
  throw std::invalid_argument("unknown norm '" + name +
                              "' (expected l2, h1, or h1dual)");
}

std::string norm_name(NormKind norm) {
  switch (norm) {
    case NormKind::L2: return "l2";
    case NormKind::H1: return "h1";
    case NormKind::H1Dual: return "h1dual";
  }
  return "?";
}

CondResult wavelet_condition(MeshHierarchy& h, int levels, NormKind norm,
                             double tol, std::uint64_t seed) {
  if (levels < 0) throw std::invalid_argument("levels must be >= 0");
  if (norm != NormKind::H1Dual) {
    MultilevelTransform mt(h, levels);
    const Sparse A = norm == NormKind::L2 ? p2_mass(h.level(levels))
                                          : p2_stiffness(h.level(levels));
    const Eigen::VectorXd D =
        inv_sqrt(gram_diagonal(mt, A), "wavelet_condition");
    const auto op = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd u = mt.synthesis(Eigen::VectorXd(D.cwiseProduct(v)));
      u = A * u;
      return Eigen::VectorXd(D.cwiseProduct(mt.synthesis_transpose(u)));
    };
    return lanczos_condition(op, mt.coeff_dim(), tol, seed);
  }

  if (levels > dual_level_cap)
    throw std::invalid_argument("dual-norm condition is limited to " +
                                std::to_string(dual_level_cap) + " levels");
  h.ensure_level(levels + 1);
  MultilevelTransform mt(h, levels);
  const Sparse Mx = mixed_mass(h, levels);
  const Sparse A1 = p1_stiffness(h.level(levels + 1));
  Eigen::SparseLU<Sparse> lu_mix;
  lu_mix.compute(Mx);
  if (lu_mix.info() != Eigen::Success)
    throw std::runtime_error("mixed pairing factorization failed");

  const int n = mt.coeff_dim();
  Eigen::VectorXd d(n);
  const int block = 256;
  for (int c0 = 0; c0 < n; c0 += block) {
    const int b = std::min(block, n - c0);
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, b);
    for (int k = 0; k < b; ++k) E(c0 + k, k) = 1.0;
    const Eigen::MatrixXd Z = lu_mix.solve(mt.analysis_transpose(E));
    const Eigen::MatrixXd AZ = A1 * Z;
    for (int k = 0; k < b; ++k) d[c0 + k] = Z.col(k).dot(AZ.col(k));
  }
  const Eigen::VectorXd D = inv_sqrt(d, "wavelet_condition (dual)");

  const auto op = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd u = mt.analysis_transpose(Eigen::VectorXd(D.cwiseProduct(v)));
    u = lu_mix.solve(u);
    u = A1 * u;
    u = lu_mix.transpose().solve(u);
    return Eigen::VectorXd(D.cwiseProduct(mt.analysis(u)));
  };
  return lanczos_condition(op, n, tol, seed);
}

Eigen::SparseMatrix<double> wavelet_gram(MeshHierarchy& h, int levels,
                                         NormKind norm, int max_dense) {
  if (norm != NormKind::H1Dual) {
    MultilevelTransform mt(h, levels);
    const Sparse A = norm == NormKind::L2 ? p2_mass(h.level(levels))
                                          : p2_stiffness(h.level(levels));
    const Eigen::VectorXd D = inv_sqrt(gram_diagonal(mt, A), "wavelet_gram");
    const Sparse W = mt.matrix();
    const Sparse G = Sparse(W.transpose() * Sparse(A * W));
    return D.asDiagonal() * G * D.asDiagonal();
  }

  if (levels > dual_level_cap)
    throw std::invalid_argument("dual-norm Gram is limited to " +
                                std::to_string(dual_level_cap) + " levels");
  h.ensure_level(levels + 1);
  MultilevelTransform mt(h, levels);
  const int n = mt.coeff_dim();
  if (n > max_dense)
    throw std::invalid_argument("dual-norm Gram needs " + std::to_string(n) +
                                " dense rows, above the cap of " +
                                std::to_string(max_dense));
  const Sparse Mx = mixed_mass(h, levels);
  const Sparse A1 = p1_stiffness(h.level(levels + 1));
  Eigen::SparseLU<Sparse> lu_mix;
  lu_mix.compute(Mx);
  if (lu_mix.info() != Eigen::Success)
    throw std::runtime_error("mixed pairing factorization failed");
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Wt = lu_mix.solve(mt.analysis_transpose(id));
  const Eigen::MatrixXd G = Wt.transpose() * (A1 * Wt);
  const Eigen::VectorXd D = inv_sqrt(G.diagonal(), "wavelet_gram (dual)");
  const Eigen::MatrixXd scaled = D.asDiagonal() * G * D.asDiagonal();
  return scaled.sparseView();
}

EigenRange reference_eigen_range(const LocalCollection& coll) {
  const Eigen::MatrixXd G = gram(coll, coll).to_double();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()[0], es.eigenvalues()[G.rows() - 1]};
}

namespace {

// Largest eigenvalue of a symmetric positive operator by Lanczos with full
// reorthogonalization.  Unlike lanczos_condition, only the top Ritz pair has
// to settle, so a clustered opposite end cannot stall convergence.
double lanczos_dominant(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, int n,
    double tol) {
  std::mt19937_64 rng(1);
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i)
    q[i] = 2.0 * (static_cast<double>(rng()) /
                  static_cast<double>(std::mt19937_64::max())) -
           1.0;
  q.normalize();

  std::vector<Eigen::VectorXd> Q = {q};
  std::vector<double> alpha, beta;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd w = op(Q[k]);
    if (k > 0) w -= beta[k - 1] * Q[k - 1];
    const double a = Q[k].dot(w);
    alpha.push_back(a);
    w -= a * Q[k];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& qi : Q) w -= qi.dot(w) * qi;
    const double b = w.norm();

    const int m = k + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double theta = es.eigenvalues()[m - 1];
    const double resid = b * std::abs(es.eigenvectors()(m - 1, m - 1));
    if (m == n || b <= 1e-14 * std::abs(theta) || resid <= tol * std::abs(theta))
      return theta;
    beta.push_back(b);
    Q.push_back(w / b);
  }
  throw std::runtime_error("lanczos_dominant: no convergence");
}

}  // namespace

EigenRange collection_eigen_range(MeshHierarchy& h, int j,
                                  const LocalCollection& coll, double tol) {
  h.ensure_level(j + 1);
  const GlobalCollection A = assemble(h, j, coll, "Sigma");
  const Sparse G = global_gram(A, A).to_sparse();
  const int n = static_cast<int>(G.rows());
  if (n <= 2500) {
    const Eigen::MatrixXd Gd(G);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Gd, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()[0], es.eigenvalues()[n - 1]};
  }
  // Each extremal end comes from the Lanczos run where it dominates: the
  // largest eigenvalue straight from G, the smallest through shift-invert.
  Eigen::SimplicialLDLT<Sparse> ldlt(G);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("collection gram factorization failed");
  const double lmax = lanczos_dominant(
      [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(G * v); }, n, tol);
  const double inv_lmin = lanczos_dominant(
      [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(ldlt.solve(v)); },
      n, tol);
  return {1.0 / inv_lmin, lmax};
}

void write_csv(std::ostream& out, const std::vector<CondRow>& rows) {
  out << "J,kappa,lambda_min,lambda_max,iters\n";
  char buf[192];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%d\n", row.level,
                  row.result.kappa, row.result.lambda_min,
                  row.result.lambda_max, row.result.iters);
    out << buf;
  }
}

bool export_matrix_market(const Eigen::SparseMatrix<double>& M,
                          const std::string& path) {
  return Eigen::saveMarket(M, path);
}

}  // namespace femwave
