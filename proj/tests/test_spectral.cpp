#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <unsupported/Eigen/SparseExtra>

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "femwave/assembly.hpp"
#include "femwave/builtin_meshes.hpp"
#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"
#include "femwave/spectral.hpp"
#include "femwave/wavelets.hpp"

using namespace femwave;

namespace {

// Unit square split into two triangles, with no boundary-condition edges, so
// every P2 node is a degree of freedom and polynomial traces are exact
// members of the space.
MeshHierarchy free_square() {
  const std::string text =
      "femwave-mesh 1\nv 0 0\nv 1 0\nv 1 1\nv 0 1\nt 0 1 2\nt 0 2 3\n";
  std::istringstream in(text);
  return MeshHierarchy{load_mesh(in, "free-square")};
}

// Nodal P2 trace of a polynomial over the dof nodes of a mesh.
Eigen::VectorXd trace_of(const Triangulation& mesh,
                         double (*f)(double, double)) {
  const std::vector<int> dofs = p2_dofs(mesh);
  Eigen::VectorXd v(static_cast<int>(dofs.size()));
  for (size_t i = 0; i < dofs.size(); ++i) {
    const Vec2R p = mesh.p2_node_point(dofs[i]);
    v[static_cast<int>(i)] = f(to_double(p.x), to_double(p.y));
  }
  return v;
}

// Exact L2 pairing of a nodal P2 trace with the hat of one vertex, assembled
// from the quadratic-by-linear element mass matrix on the same mesh.
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

}  // namespace

TEST_CASE("quadratic mass matrix integrates coordinate polynomials exactly") {
  MeshHierarchy h = free_square();
  h.ensure_level(2);
  const Triangulation& mesh = h.level(1);
  const Eigen::SparseMatrix<double> M = p2_mass(mesh);
  const Eigen::VectorXd one = trace_of(mesh, [](double, double) { return 1.0; });
  const Eigen::VectorXd x = trace_of(mesh, [](double a, double) { return a; });
  const Eigen::VectorXd y = trace_of(mesh, [](double, double b) { return b; });
  const Eigen::VectorXd xy = trace_of(mesh, [](double a, double b) { return a * b; });
  CHECK(one.dot(M * one) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(x.dot(M * one) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(x.dot(M * x) == doctest::Approx(1.0 / 3).epsilon(1e-13));
  CHECK(x.dot(M * y) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(xy.dot(M * one) == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("stiffness matrices integrate gradients of polynomials exactly") {
  MeshHierarchy h = free_square();
  h.ensure_level(2);
  const Triangulation& mesh = h.level(1);
  const Eigen::SparseMatrix<double> A = p2_stiffness(mesh);
  const Eigen::VectorXd one = trace_of(mesh, [](double, double) { return 1.0; });
  const Eigen::VectorXd x = trace_of(mesh, [](double a, double) { return a; });
  const Eigen::VectorXd y = trace_of(mesh, [](double, double b) { return b; });
  const Eigen::VectorXd xy = trace_of(mesh, [](double a, double b) { return a * b; });
  // grad 1 = 0; grad x and grad y orthonormal; int |grad(xy)|^2 = 2/3.
  CHECK((A * one).norm() <= 1e-13);
  CHECK(x.dot(A * x) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(x.dot(A * y) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(y.dot(A * y) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(xy.dot(A * xy) == doctest::Approx(2.0 / 3).epsilon(1e-13));

  // Piecewise-linear stiffness on the vertices: x and y are linear, so the
  // same identities hold; constants are again in the kernel.
  const Eigen::SparseMatrix<double> A1 = p1_stiffness(mesh);
  Eigen::VectorXd vx(mesh.vertex_count()), vy(mesh.vertex_count()), v1(mesh.vertex_count());
  int r = 0;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (mesh.is_gamma_vertex(v)) continue;
    vx[r] = to_double(mesh.vertex(v).x);
    vy[r] = to_double(mesh.vertex(v).y);
    v1[r] = 1.0;
    ++r;
  }
  vx.conservativeResize(r);
  vy.conservativeResize(r);
  v1.conservativeResize(r);
  REQUIRE(A1.rows() == r);
  CHECK((A1 * v1).norm() <= 1e-13);
  CHECK(vx.dot(A1 * vx) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(vx.dot(A1 * vy) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("mixed pairing agrees with a fine-mesh hat oracle") {
  const RefElement& re = RefElement::instance();
  MeshHierarchy h{resolve_mesh("square")};
  h.ensure_level(3);
  const int j = 1;
  const Eigen::SparseMatrix<double> Mx = mixed_mass(h, j);
  const std::vector<int> dofs = p2_dofs(h.level(j));
  REQUIRE(Mx.rows() == static_cast<int>(dofs.size()));
  REQUIRE(Mx.cols() == Mx.rows());
  const GlobalCollection N = assemble(h, j, re.N(), "N");
  const Triangulation& fine = h.level(j + 1);
  const Eigen::MatrixXd dense(Mx);
  for (int r = 0; r < N.size(); ++r) {
    REQUIRE(N.index_nodes[r] == dofs[r]);
    for (size_t c = 0; c < dofs.size(); ++c) {
      const Rat exact = pairing_with_hat(fine, N.nodal_values[r], dofs[c]);
      CHECK(dense(r, static_cast<int>(c)) ==
            doctest::Approx(to_double(exact)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Lanczos matches the dense spectrum of a seeded SPD matrix") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 80;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) B(i, k) = u(rng);
  const Eigen::MatrixXd A =
      B.transpose() * B + Eigen::MatrixXd::Identity(n, n) * 0.5;
  const CondResult dense = dense_condition(A);
  const auto op = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v); };
  const CondResult it = lanczos_condition(op, n, 1e-10, 99);
  CHECK(it.converged);
  CHECK(it.lambda_max == doctest::Approx(dense.lambda_max).epsilon(1e-8));
  CHECK(it.lambda_min == doctest::Approx(dense.lambda_min).epsilon(1e-8));
  CHECK(it.kappa == doctest::Approx(dense.kappa).epsilon(1e-7));
  // deterministic for a fixed seed
  const CondResult again = lanczos_condition(op, n, 1e-10, 99);
  CHECK(again.iters == it.iters);
  CHECK(again.kappa == it.kappa);
}

TEST_CASE("Lanczos is exact on tiny problems and flags non-convergence") {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
  D.diagonal() << 1.0, 2.0, 10.0;
  const auto op = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(D * v); };
  const CondResult r = lanczos_condition(op, 3, 1e-12, 5);
  CHECK(r.converged);
  CHECK(r.kappa == doctest::Approx(10.0).epsilon(1e-12));

  // One iteration cannot resolve a 200-dim spread: must report non-convergence.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 50.0);
  Eigen::VectorXd diag(200);
  for (int i = 0; i < 200; ++i) diag[i] = u(rng);
  const auto op2 = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(diag.asDiagonal() * v);
  };
  const CondResult bad = lanczos_condition(op2, 200, 1e-12, 1, 2);
  CHECK(!bad.converged);
}

TEST_CASE("wavelet condition numbers match a dense oracle on small levels") {
  for (const NormKind norm : {NormKind::L2, NormKind::H1, NormKind::H1Dual}) {
    MeshHierarchy h{resolve_mesh("square")};
    for (int J = 0; J <= 2; ++J) {
      const CondResult it = wavelet_condition(h, J, norm, 1e-8);
      const Eigen::MatrixXd G(wavelet_gram(h, J, norm));
      const CondResult dense = dense_condition(G);
      CHECK(it.converged);
      CHECK(it.kappa == doctest::Approx(dense.kappa).epsilon(1e-4));
    }
  }
}

TEST_CASE("scaled wavelet Grams are symmetric with unit diagonal") {
  MeshHierarchy h{resolve_mesh("lshape")};
  for (const NormKind norm : {NormKind::L2, NormKind::H1, NormKind::H1Dual}) {
    const Eigen::SparseMatrix<double> G = wavelet_gram(h, 2, norm);
    const Eigen::MatrixXd D(G);
    CHECK((D - D.transpose()).norm() <= 1e-10 * D.norm());
    for (int i = 0; i < D.rows(); ++i)
      CHECK(D(i, i) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("condition numbers grow monotonically with the level") {
  for (const NormKind norm : {NormKind::L2, NormKind::H1}) {
    MeshHierarchy h{resolve_mesh("square")};
    double prev = 0.0;
    for (int J = 0; J <= 3; ++J) {
      const CondResult r = wavelet_condition(h, J, norm, 1e-8);
      REQUIRE(r.converged);
      // nested coefficient spaces: eigenvalue interlacing forces growth
      CHECK(r.kappa >= prev - 1e-9);
      prev = r.kappa;
    }
    CHECK(prev > 1.0);
  }
}

TEST_CASE("condition numbers are invariant under uniform mesh scaling") {
  const auto kappa_of = [](const std::string& text, NormKind norm) {
    std::istringstream in(text);
    MeshHierarchy h{load_mesh(in, "scaled")};
    return wavelet_condition(h, 2, norm, 1e-9).kappa;
  };
  const std::string unit =
      "femwave-mesh 1\nv 0 0\nv 1 0\nv 1 1\nv 0 1\nt 0 1 2\nt 0 2 3\n"
      "g 0 1\ng 1 2\ng 2 3\ng 3 0\n";
  const std::string big =
      "femwave-mesh 1\nv 0 0\nv 8 0\nv 8 8\nv 0 8\nt 0 1 2\nt 0 2 3\n"
      "g 0 1\ng 1 2\ng 2 3\ng 3 0\n";
  for (const NormKind norm : {NormKind::L2, NormKind::H1}) {
    const double a = kappa_of(unit, norm);
    const double b = kappa_of(big, norm);
    CHECK(a == doctest::Approx(b).epsilon(1e-8));
  }
}

TEST_CASE("extremal eigenvalue estimates bracket Rayleigh quotients") {
  MeshHierarchy h{resolve_mesh("square")};
  const CondResult r = wavelet_condition(h, 3, NormKind::L2, 1e-8);
  const Eigen::SparseMatrix<double> G = wavelet_gram(h, 3, NormKind::L2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd v(G.rows());
    for (int i = 0; i < G.rows(); ++i) v[i] = u(rng);
    const double rq = v.dot(G * v) / v.squaredNorm();
    CHECK(rq >= r.lambda_min * (1.0 - 1e-6));
    CHECK(rq <= r.lambda_max * (1.0 + 1e-6));
  }
}

TEST_CASE("dual-norm level cap throws a usage error") {
  MeshHierarchy h{resolve_mesh("square")};
  CHECK_THROWS_AS(wavelet_condition(h, dual_level_cap + 1, NormKind::H1Dual),
                  std::invalid_argument);
  CHECK_THROWS_AS(wavelet_gram(h, dual_level_cap + 1, NormKind::H1Dual),
                  std::invalid_argument);
}

TEST_CASE("norm names parse and render consistently") {
  CHECK(parse_norm("l2") == NormKind::L2);
  CHECK(parse_norm("h1") == NormKind::H1);
  CHECK(parse_norm("h1dual") == NormKind::H1Dual);
  for (const NormKind n : {NormKind::L2, NormKind::H1, NormKind::H1Dual})
    CHECK(parse_norm(norm_name(n)) == n);
  CHECK_THROWS_AS(parse_norm("h2"), std::invalid_argument);
}

TEST_CASE("CSV report uses the documented header and row layout") {
  std::vector<CondRow> rows;
  rows.push_back({0, CondResult{1.0, 1.0, 1.0, 1, true}});
  rows.push_back({1, CondResult{4.815680805, 0.2896700824, 1.394958656, 8, true}});
  std::ostringstream out;
  write_csv(out, rows);
  CHECK(out.str() ==
        "J,kappa,lambda_min,lambda_max,iters\n"
        "0,1,1,1,1\n"
        "1,4.815680805,0.2896700824,1.394958656,8\n");
}

TEST_CASE("matrix market export round trips through Eigen's reader") {
  MeshHierarchy h{resolve_mesh("square")};
  const Eigen::SparseMatrix<double> G = wavelet_gram(h, 2, NormKind::L2);
  const std::string path = "femwave_test_gram.mtx";
  REQUIRE(export_matrix_market(G, path));
  Eigen::SparseMatrix<double> back;
  REQUIRE(Eigen::loadMarket(back, path));
  REQUIRE(back.rows() == G.rows());
  REQUIRE(back.cols() == G.cols());
  CHECK((Eigen::MatrixXd(back) - Eigen::MatrixXd(G)).norm() <=
        1e-12 * Eigen::MatrixXd(G).norm());
  std::remove(path.c_str());
}

TEST_CASE("export to an unwritable path reports failure") {
  MeshHierarchy h{resolve_mesh("square")};
  const Eigen::SparseMatrix<double> G = wavelet_gram(h, 1, NormKind::L2);
  CHECK(!export_matrix_market(G, "/nonexistent-dir/impossible/out.mtx"));
}
