#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "femwave/assembly.hpp"
#include "femwave/builtin_meshes.hpp"
#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"
#include "femwave/spectral.hpp"
#include "femwave/wavelets.hpp"

using namespace femwave;

namespace {

// Exact L2 pairing of a nodal P2 trace with the hat function of one vertex,
// assembled from the single-triangle quadratic-by-linear mass matrix. The
// dual space at level j is spanned by exactly the interior hats of level j+1,
// so a wavelet is dual-orthogonal iff it annihilates every one of them.
Rat pairing_with_hat(const Triangulation& mesh,
                     const std::vector<std::pair<int, Rat>>& a, int vertex) {
  const RatMat& m = quadratic_linear_mass();
  const auto value_at = [&](int node) {
    const auto it = std::lower_bound(
        a.begin(), a.end(), std::make_pair(node, Rat(0)),
        [](const auto& x, const auto& y) { return x.first < y.first; });
    return (it != a.end() && it->first == node) ? it->second : Rat(0);
  };
  Rat acc = 0;
  for (int t : mesh.vertex_triangles(vertex)) {
    const auto& tri = mesh.triangle(t);
    const auto n6 = coarse6_nodes(mesh, t);
    const int k = static_cast<int>(
        std::find(tri.begin(), tri.end(), vertex) - tri.begin());
    for (int i = 0; i < 6; ++i) {
      const Rat ai = value_at(n6[i]);
      if (ai != 0) acc += mesh.volume(t) * m(i, k) * ai;
    }
  }
  return acc;
}

Eigen::MatrixXd scaled_columns(const GlobalCollection& c, int n_rows,
                               const std::vector<int>& row_nodes) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_rows, c.size());
  std::vector<int> node_to_row(row_nodes.empty() ? 0 : row_nodes.back() + 1, -1);
  for (int r = 0; r < static_cast<int>(row_nodes.size()); ++r)
    node_to_row[row_nodes[r]] = r;
  for (int f = 0; f < c.size(); ++f) {
    const double mu = c.mu(f);
    for (const auto& [node, val] : c.nodal_values[f]) {
      const int r = node < static_cast<int>(node_to_row.size())
                        ? node_to_row[node]
                        : -1;
      if (r >= 0) M(r, f) = mu * to_double(val);
    }
  }
  return M;
}

double cond_of(const Eigen::MatrixXd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("wavelets kill every interior hat of the fine mesh, exactly") {
  for (const char* name : {"square", "lshape"}) {
    MeshHierarchy h{resolve_mesh(name)};
    for (int j = 0; j <= 1; ++j) {
      const WaveletLevel w = build_wavelets(h, j);
      const Triangulation& fine = h.level(j + 1);
      for (int y = 0; y < w.size(); ++y)
        for (int v = 0; v < fine.vertex_count(); ++v) {
          if (fine.is_gamma_vertex(v)) continue;
          CHECK(pairing_with_hat(fine, w.nodal_values[y], v) == 0);
        }
    }
  }
}

TEST_CASE("correction counts respect the wavelet kind") {
  MeshHierarchy h{resolve_mesh("lshape")};
  const WaveletLevel w = build_wavelets(h, 1);
  int edge = 0, interior = 0;
  for (int y = 0; y < w.size(); ++y) {
    if (w.kind[y] == WaveletKind::Edge) {
      ++edge;
      CHECK(w.n_corrections[y] <= 1);
    } else {
      ++interior;
      CHECK(w.n_corrections[y] <= 2);
    }
    CHECK(w.anchor_vertex[y] >= 0);
  }
  CHECK(edge > 0);
  CHECK(interior > 0);
  // details complement the coarse space
  CHECK(w.size() + static_cast<int>(p2_dofs(h.level(1)).size()) ==
        static_cast<int>(p2_dofs(h.level(2)).size()));
}

TEST_CASE("wavelets clear of the boundary set have exactly two vanishing moments") {
  MeshHierarchy h{resolve_mesh("lshape")};
  for (int j = 0; j <= 1; ++j) {
    const WaveletLevel w = build_wavelets(h, j);
    const Triangulation& fine = h.level(j + 1);
    int clear = 0;
    for (int y = 0; y < w.size(); ++y) {
      if (!support_avoids_gamma(fine, w.nodal_values[y])) continue;
      ++clear;
      const auto m = integrate_moments(fine, w.nodal_values[y]);
      CHECK(m[0] == 0);  // integral against 1
      CHECK(m[1] == 0);  // integral against x
      CHECK(m[2] == 0);  // integral against y
    }
    if (j == 1) CHECK(clear > 0);
  }
}

TEST_CASE("supports stay inside the one-ring star with tight node bounds") {
  for (const char* name : {"square", "lshape"}) {
    MeshHierarchy h{resolve_mesh(name)};
    for (int j = 0; j <= 1; ++j) {
      const WaveletLevel w = build_wavelets(h, j);
      const SupportReport rep = check_supports(h, j, w);
      CHECK(rep.within_bounds);
      CHECK(rep.max_edge_nodes <= rep.max_edge_bound);
      CHECK(rep.max_interior_nodes <= rep.max_interior_bound);
    }
  }
}

TEST_CASE("support node counts are 7+valence and 9+valence away from the boundary") {
  // On the uniformly refined square every interior anchor has valence 6.
  MeshHierarchy h{resolve_mesh("square")};
  const WaveletLevel w = build_wavelets(h, 2);
  const Triangulation& coarse = h.level(2);
  int seen_edge = 0, seen_interior = 0;
  for (int y = 0; y < w.size(); ++y) {
    if (!support_avoids_gamma(h.level(3), w.nodal_values[y])) continue;
    const int val = coarse.valence(w.anchor_vertex[y]);
    if (val != 6) continue;
    if (w.kind[y] == WaveletKind::Edge) {
      ++seen_edge;
      CHECK(w.support_nodes(y) == 13);  // 7 + valence
    } else {
      ++seen_interior;
      CHECK(w.support_nodes(y) == 15);  // 9 + valence
    }
  }
  CHECK(seen_edge > 0);
  CHECK(seen_interior > 0);
}

TEST_CASE("multilevel round trip and transpose consistency") {
  MeshHierarchy h{resolve_mesh("lshape")};
  MultilevelTransform mt(h, 2);
  const int n = mt.coeff_dim();
  REQUIRE(n == mt.space_dim(2));
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd c(n), x(n);
  for (int i = 0; i < n; ++i) {
    c[i] = u(rng);
    x[i] = u(rng);
  }
  const Eigen::VectorXd nodal = mt.synthesis(c);
  CHECK((mt.analysis(nodal) - c).norm() <= 1e-10 * c.norm());
  CHECK((mt.synthesis(mt.analysis(x)) - x).norm() <= 1e-10 * x.norm());
  // <W c, x> = <c, W^T x> and <W^{-1} x, c> = <x, W^{-T} c>
  CHECK(nodal.dot(x) ==
        doctest::Approx(c.dot(mt.synthesis_transpose(x))).epsilon(1e-12));
  CHECK(mt.analysis(x).dot(c) ==
        doctest::Approx(x.dot(mt.analysis_transpose(c))).epsilon(1e-12));
}

TEST_CASE("round trip matches a dense inverse oracle") {
  MeshHierarchy h{resolve_mesh("square")};
  MultilevelTransform mt(h, 3);
  const Eigen::MatrixXd W = Eigen::MatrixXd(mt.matrix());
  const int n = mt.coeff_dim();
  const Eigen::MatrixXd Winv = W.partialPivLu().inverse();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    CHECK((mt.analysis(x) - Winv * x).norm() <= 1e-9 * x.norm());
    CHECK((mt.synthesis(x) - W * x).norm() <= 1e-12 * x.norm());
    CHECK((mt.synthesis_transpose(x) - W.transpose() * x).norm() <=
          1e-12 * x.norm());
    CHECK((mt.analysis_transpose(x) - Winv.transpose() * x).norm() <=
          1e-9 * x.norm());
  }
}

TEST_CASE("coefficient blocks line up with level dimensions") {
  MeshHierarchy h{resolve_mesh("square")};
  MultilevelTransform mt(h, 3);
  CHECK(mt.block_offset(0) == 0);
  int expect = mt.space_dim(0);
  for (int j = 1; j <= 3; ++j) {
    CHECK(mt.block_offset(j) == expect);
    expect += mt.detail_dim(j);
    CHECK(mt.detail_dim(j) == mt.space_dim(j) - mt.space_dim(j - 1));
  }
  CHECK(expect == mt.coeff_dim());
  const int side = (1 << 4) - 1;
  CHECK(mt.coeff_dim() == side * side);
}

TEST_CASE("two-level dual transform satisfies the defining identities") {
  for (const char* name : {"square", "lshape"}) {
    MeshHierarchy h{resolve_mesh(name)};
    const int j = 1;
    const TwoLevelDual d = dual_two_level(h, j);
    const int n = static_cast<int>(d.forward.rows());
    REQUIRE(d.dual.rows() == n);
    const Eigen::MatrixXd prod = d.forward.transpose() * d.dual;
    CHECK((prod - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-10 * n);
    // dual wavelet block is biorthogonal to the primal wavelet block and
    // annihilates the coarse block
    const int nc = d.n_coarse;
    const Eigen::MatrixXd cross =
        d.forward.rightCols(n - nc).transpose() * d.dual.rightCols(n - nc);
    CHECK((cross - Eigen::MatrixXd::Identity(n - nc, n - nc)).norm() <=
          1e-10 * n);
    const Eigen::MatrixXd mixed =
        d.forward.leftCols(nc).transpose() * d.dual.rightCols(n - nc);
    CHECK(mixed.norm() <= 1e-10 * n);
  }
}

TEST_CASE("angle constants certify the wavelet condition bound") {
  const RefElement& re = RefElement::instance();
  for (const char* name : {"square", "lshape"}) {
    MeshHierarchy h{resolve_mesh(name)};
    const int j = 1;
    const AngleConstants ac = angle_constants(h, j);
    CHECK(ac.delta > 0.0);
    CHECK(ac.epsilon < 1.0);

    // Assemble the scaled detail collection and the wavelets at level j+1,
    // and compare their mass-Gram condition numbers through the bound
    // kappa(Psi) <= (1 + 1/delta) / sqrt(1 - epsilon) * kappa(Xi).
    h.ensure_level(j + 2);
    const std::vector<int> dofs = p2_dofs(h.level(j + 1));
    const int n1 = static_cast<int>(dofs.size());
    const Eigen::SparseMatrix<double> mass = p2_mass(h.level(j + 1));
    const GlobalCollection xi = assemble(h, j, re.Xi(), "Xi");
    const Eigen::MatrixXd X = scaled_columns(xi, n1, dofs);
    const Eigen::MatrixXd mass_X = mass * X;
    const double kappa_xi = cond_of(X.transpose() * mass_X);

    const TwoLevelDual d = dual_two_level(h, j);
    const Eigen::MatrixXd Psi = d.forward.rightCols(n1 - d.n_coarse);
    const Eigen::MatrixXd mass_Psi = mass * Psi;
    const double kappa_psi = cond_of(Psi.transpose() * mass_Psi);

    const double bound =
        (1.0 + 1.0 / ac.delta) / std::sqrt(1.0 - ac.epsilon) * kappa_xi;
    CHECK(kappa_psi <= bound * (1.0 + 1e-9));
  }
}

TEST_CASE("assembled angle constants are no worse than the local ones") {
  const AngleConstants local = local_angle_constants();
  CHECK(local.delta == doctest::Approx(0.631364).epsilon(1e-4));
  CHECK(local.epsilon == doctest::Approx(0.472410).epsilon(1e-4));
  for (const char* name : {"square", "lshape"}) {
    MeshHierarchy h{resolve_mesh(name)};
    for (int j = 0; j <= 1; ++j) {
      const AngleConstants ac = angle_constants(h, j);
      // the sup over the assembled spans cannot exceed the single-triangle sup
      CHECK(ac.epsilon <= local.epsilon + 1e-10);
      CHECK(ac.delta > 0.0);
      CHECK(ac.epsilon < 1.0);
    }
  }
}

TEST_CASE("level-0 wavelets are the scaled nodal basis") {
  MeshHierarchy h{resolve_mesh("square")};
  MultilevelTransform mt(h, 0);
  CHECK(mt.coeff_dim() == 1);
  CHECK(mt.max_level() == 0);
  const Eigen::MatrixXd W = Eigen::MatrixXd(mt.matrix());
  REQUIRE(W.rows() == 1);
  // the single interior dof is the diagonal midpoint with patch volume 1
  CHECK(W(0, 0) == doctest::Approx(1.0));
  CHECK(mt.level0_scaling()[0] == doctest::Approx(1.0));
}
