#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "femwave/assembly.hpp"
#include "femwave/builtin_meshes.hpp"
#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"

using namespace femwave;

namespace {

// Exact mass integral <a, b> of two nodal P2 traces over the mesh, assembled
// triangle by triangle from the plain quadratic element mass matrix. This is
// an independent route to the same quantity global_gram computes through the
// red-split reference machinery.
Rat p2_pairing_oracle(const Triangulation& mesh,
                      const std::vector<std::pair<int, Rat>>& a,
                      const std::vector<std::pair<int, Rat>>& b) {
  const RatMat& m = quadratic_mass();
  const auto value_at = [](const std::vector<std::pair<int, Rat>>& f, int node) {
    const auto it = std::lower_bound(
        f.begin(), f.end(), std::make_pair(node, Rat(0)),
        [](const auto& x, const auto& y) { return x.first < y.first; });
    return (it != f.end() && it->first == node) ? it->second : Rat(0);
  };
  Rat acc = 0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto n6 = coarse6_nodes(mesh, t);
    for (int i = 0; i < 6; ++i) {
      const Rat ai = value_at(a, n6[i]);
      if (ai == 0) continue;
      for (int k = 0; k < 6; ++k) {
        const Rat bk = value_at(b, n6[k]);
        if (bk != 0) acc += mesh.volume(t) * m(i, k) * ai * bk;
      }
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("assembled biorthogonality is exact on both meshes") {
  const RefElement& re = RefElement::instance();
  for (const char* name : {"square", "lshape"}) {
    MeshHierarchy h{resolve_mesh(name)};
    h.ensure_level(3);
    for (int j = 0; j <= 2; ++j) {
      const GlobalCollection theta = assemble(h, j, re.Theta(), "Theta");
      const GlobalCollection phit = assemble(h, j, re.PhiTilde(), "PhiTilde");
      REQUIRE(theta.size() == phit.size());
      CHECK(global_gram(theta, phit).is_identity());
    }
  }
}

TEST_CASE("assembly rejects a discontinuous local collection") {
  // Double the midpoint-3 nodal quadratic: on a shared edge one triangle's
  // member now reports twice the value the neighboring triangle's member
  // reports at the same fine node, so the nodal traces clash.
  LocalCollection broken = make_quadratic_nodals();
  broken.fn[3].coeffs[3] += 1;
  MeshHierarchy h{resolve_mesh("square")};
  h.ensure_level(2);
  CHECK_THROWS_WITH_AS(assemble(h, 1, broken, "broken"),
                       doctest::Contains("inconsistent nodal trace"),
                       std::runtime_error);
  // The offending collection's label is part of the diagnostic.
  CHECK_THROWS_WITH_AS(assemble(h, 1, broken, "broken"),
                       doctest::Contains("broken"), std::runtime_error);
}

TEST_CASE("assembled functions agree with an elementwise mass oracle") {
  const RefElement& re = RefElement::instance();
  MeshHierarchy h{resolve_mesh("lshape")};
  h.ensure_level(2);
  const GlobalCollection theta = assemble(h, 0, re.Theta(), "Theta");
  const GlobalCollection xi = assemble(h, 0, re.Xi(), "Xi");
  const FactoredGram g = global_gram(theta, xi);
  const Triangulation& fine = h.level(1);
  for (int i = 0; i < theta.size(); i += 3) {
    for (int k = 0; k < xi.size(); k += 5) {
      const auto it = g.R.find({i, k});
      const Rat expect = (it == g.R.end()) ? Rat(0) : it->second;
      CHECK(p2_pairing_oracle(fine, theta.nodal_values[i], xi.nodal_values[k]) ==
            expect);
    }
  }
}

TEST_CASE("factored Gram separates normalization exactly") {
  const RefElement& re = RefElement::instance();
  MeshHierarchy h{resolve_mesh("square")};
  h.ensure_level(2);
  const GlobalCollection n = assemble(h, 1, re.N(), "N");
  const FactoredGram g = global_gram(n, n);
  REQUIRE(g.identical_index);
  const Eigen::MatrixXd dense = g.to_dense();
  for (const auto& [ik, val] : g.R) {
    const auto [i, k] = ik;
    const double scaled = to_double(val) / std::sqrt(to_double(g.pv_row[i]) *
                                                     to_double(g.pv_col[k]));
    CHECK(dense(i, k) == doctest::Approx(scaled).epsilon(1e-14));
  }
  // symmetry of the rational factor for a self-pairing
  for (const auto& [ik, val] : g.R) {
    const auto it = g.R.find({ik.second, ik.first});
    REQUIRE(it != g.R.end());
    CHECK(it->second == val);
  }
}

TEST_CASE("node order of the assembled collection is ascending and off the boundary set") {
  const RefElement& re = RefElement::instance();
  MeshHierarchy h{resolve_mesh("lshape")};
  h.ensure_level(2);
  const GlobalCollection phit = assemble(h, 1, re.PhiTilde(), "PhiTilde");
  const Triangulation& fine = h.level(2);
  for (int f = 0; f < phit.size(); ++f) {
    if (f) CHECK(phit.index_nodes[f - 1] < phit.index_nodes[f]);
    CHECK(!fine.p2_node_on_gamma(phit.index_nodes[f]));
    for (const auto& [node, val] : phit.nodal_values[f])
      if (fine.p2_node_on_gamma(node)) CHECK(val == 0);
  }
  CHECK(phit.size() == static_cast<int>(p2_dofs(h.level(1)).size()));
}

TEST_CASE("assembled spectra stay inside the reference bounds") {
  // The scaled global Gram of each collection has extremal eigenvalues
  // controlled by the reference-element Gram of the same collection; this is
  // the locality argument the stability results rest on.
  const RefElement& re = RefElement::instance();
  const LocalCollection theta_xi = LocalCollection::concat(re.Theta(), re.Xi());
  struct Named {
    const char* label;
    const LocalCollection* coll;
  };
  const Named collections[] = {{"N", &re.N()},
                               {"Ntilde", &re.Ntilde()},
                               {"Theta+Xi", &theta_xi}};
  for (const auto& [label, coll] : collections) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(
        gram(*coll, *coll).to_double());
    const double ref_min = ref.eigenvalues().minCoeff();
    const double ref_max = ref.eigenvalues().maxCoeff();
    for (const char* name : {"square", "lshape"}) {
      MeshHierarchy h{resolve_mesh(name)};
      h.ensure_level(4);
      for (int j = 0; j <= 3; ++j) {
        const GlobalCollection A = assemble(h, j, *coll, label);
        if (A.size() > 2500) continue;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            global_gram(A, A).to_dense());
        CHECK(es.eigenvalues().minCoeff() >= ref_min - 1e-10);
        CHECK(es.eigenvalues().maxCoeff() <= ref_max + 1e-10);
      }
    }
  }
}

TEST_CASE("moment integrals are exact for hand-integrable traces") {
  MeshHierarchy h{resolve_mesh("square")};
  h.ensure_level(1);
  const Triangulation& mesh = h.level(1);
  // The all-ones P2 trace represents the constant 1: moments are the integrals
  // of 1, x, y over the unit square.
  std::vector<std::pair<int, Rat>> ones;
  for (int n = 0; n < mesh.p2_node_count(); ++n) ones.emplace_back(n, Rat(1));
  const auto m = integrate_moments(mesh, ones);
  CHECK(m[0] == 1);
  CHECK(m[1] == Rat(1, 2));
  CHECK(m[2] == Rat(1, 2));

  // The trace of the coordinate function x: value x(node) at every node.
  std::vector<std::pair<int, Rat>> xs;
  for (int n = 0; n < mesh.p2_node_count(); ++n)
    xs.emplace_back(n, mesh.p2_node_point(n).x);
  const auto mx = integrate_moments(mesh, xs);
  CHECK(mx[0] == Rat(1, 2));
  CHECK(mx[1] == Rat(1, 3));
  CHECK(mx[2] == Rat(1, 4));
}

TEST_CASE("inf-sup lower bound is scale invariant") {
  const RefElement& re = RefElement::instance();
  // Same mesh at two geometric scales: the normalized collections produce the
  // same inf-sup bound because mu absorbs the measure.
  const auto bound_on = [&](const std::string& text) {
    Triangulation base = [&] {
      std::istringstream in(text);
      return load_mesh(in, "scaled");
    }();
    MeshHierarchy h{std::move(base)};
    h.ensure_level(2);
    const GlobalCollection a = assemble(h, 0, re.N(), "N");
    const GlobalCollection b = assemble(h, 0, re.Ntilde(), "Ntilde");
    return infsup_bound(a, b);
  };
  const std::string unit =
      "femwave-mesh 1\nv 0 0\nv 1 0\nv 1 1\nv 0 1\nt 0 1 2\nt 0 2 3\n"
      "g 0 1\ng 1 2\ng 2 3\ng 3 0\n";
  const std::string big =
      "femwave-mesh 1\nv 0 0\nv 8 0\nv 8 8\nv 0 8\nt 0 1 2\nt 0 2 3\n"
      "g 0 1\ng 1 2\ng 2 3\ng 3 0\n";
  CHECK(bound_on(unit) == doctest::Approx(bound_on(big)).epsilon(1e-12));
  CHECK(bound_on(unit) > 0.0);
}

TEST_CASE("global Gram is independent of triangle enumeration order") {
  const RefElement& re = RefElement::instance();
  const std::string forward =
      "femwave-mesh 1\nv 0 0\nv 1 0\nv 1 1\nv 0 1\nt 0 1 2\nt 0 2 3\n"
      "g 0 1\ng 1 2\ng 2 3\ng 3 0\n";
  const std::string reversed =
      "femwave-mesh 1\nv 0 0\nv 1 0\nv 1 1\nv 0 1\nt 0 2 3\nt 0 1 2\n"
      "g 0 1\ng 1 2\ng 2 3\ng 3 0\n";
  // Node ids depend on edge enumeration (which follows triangle order), so
  // key every Gram entry by the exact coordinates of its row/column nodes.
  using Key = std::tuple<Rat, Rat, Rat, Rat>;
  const auto gram_of = [&](const std::string& text) {
    std::istringstream in(text);
    MeshHierarchy h{load_mesh(in, "sq")};
    h.ensure_level(2);
    const GlobalCollection a = assemble(h, 1, re.Theta(), "Theta");
    const GlobalCollection x = assemble(h, 1, re.Xi(), "Xi");
    const Triangulation& fine = h.level(2);
    std::map<Key, Rat> entries;
    for (const auto& [ik, val] : global_gram(a, x).R) {
      const Vec2R pr = fine.p2_node_point(a.index_nodes[ik.first]);
      const Vec2R pc = fine.p2_node_point(x.index_nodes[ik.second]);
      entries.emplace(Key{pr.x, pr.y, pc.x, pc.y}, val);
    }
    return entries;
  };
  CHECK(gram_of(forward) == gram_of(reversed));
  CHECK(!gram_of(forward).empty());
}
