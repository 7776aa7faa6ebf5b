// femwave command-line front end: reference-element report, transform
// construction, condition-number tables, invariant checks, matrix export.

#include "CLI11.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "femwave/assembly.hpp"
#include "femwave/builtin_meshes.hpp"
#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"
#include "femwave/spectral.hpp"
#include "femwave/wavelets.hpp"

namespace {

using namespace femwave;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitNoConvergence = 4;

struct Options {
  std::string mesh = "square";
  int levels = 2;
  std::string norm = "l2";
  double tol = 1e-6;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;     // cond: CSV path (stdout when empty)
  std::string matrix;  // Matrix Market target (file, or directory for build)
  std::string what = "g";
};

void validate(const Options& o) {
  if (o.levels < 0) throw std::invalid_argument("--levels must be >= 0");
  if (!(o.tol > 0.0 && o.tol < 1.0))
    throw std::invalid_argument("--tol must be in (0, 1)");
  if (o.threads < 0) throw std::invalid_argument("--threads must be >= 0");
  if (o.threads > 0) Eigen::setNbThreads(o.threads);
}

void print_rat_matrix(const RatMat& M, const std::string& indent) {
  for (int i = 0; i < M.rows(); ++i) {
    std::cout << indent;
    for (int k = 0; k < M.cols(); ++k)
      std::cout << (k ? " " : "") << to_string(M(i, k));
    std::cout << "\n";
  }
}

int cmd_ref_report() {
  const RefElement& re = RefElement::instance();
  std::cout << "reference element report\n";
  std::cout << "  collections: N (6 quadratic nodals), Ntilde (6 split-linear "
               "hats),\n"
               "    Theta (6 coarse-node functions), Xi (9 detail functions),\n"
               "    PhiTilde (6 dual functions)\n";
  std::cout << "  pairing <N, Ntilde> / vol:\n";
  print_rat_matrix(re.gram_N_Ntilde(), "    ");
  std::cout << "  <Theta, PhiTilde> = Id exactly: "
            << (re.gram_Theta_PhiTilde().is_identity() ? "yes" : "NO") << "\n";
  std::cout << "  <Xi, PhiTilde> / vol (rows = Xi, cols = PhiTilde):\n";
  print_rat_matrix(re.gram_Xi_PhiTilde(), "    ");
  std::cout << "  [Theta | Xi] coefficient determinant: "
            << to_string(re.theta_xi_determinant()) << "\n";
  std::cout << "  lambda_min of symmetrized <N, Ntilde>: "
            << re.lambda_min_sym()
            << (re.lambda_min_positive() ? " (certified positive)\n"
                                         : " (NOT certified)\n");
  return kExitOk;
}

int cmd_build(const Options& o) {
  MeshHierarchy h(resolve_mesh(o.mesh));
  MultilevelTransform mt(h, o.levels);
  const Triangulation& base = h.level(0);
  std::cout << "mesh " << base.name() << ": " << base.vertex_count()
            << " vertices, " << base.triangle_count() << " triangles, dim "
            << mt.space_dim(0) << " at level 0\n";
  for (int j = 1; j <= o.levels; ++j) {
    const WaveletLevel& w = mt.wavelets(j);
    int edge = 0, interior = 0;
    std::map<int, int> hist;
    for (int f = 0; f < w.size(); ++f) {
      (w.kind[f] == WaveletKind::Edge ? edge : interior) += 1;
      ++hist[w.support_nodes(f)];
    }
    std::cout << "level " << j << ": dim " << mt.space_dim(j) << ", "
              << w.size() << " wavelets (" << edge << " edge, " << interior
              << " interior)\n  support-size histogram:";
    for (const auto& [nodes, count] : hist)
      std::cout << " " << nodes << ":" << count;
    std::cout << "\n";
  }
  if (!o.matrix.empty()) {
    for (int j = 1; j <= o.levels; ++j) {
      const std::string base_name = o.matrix + "/";
      if (!export_matrix_market(mt.prolongation(j - 1),
                                base_name + "M0_level" + std::to_string(j) +
                                    ".mtx") ||
          !export_matrix_market(mt.detail_columns(j),
                                base_name + "M1_level" + std::to_string(j) +
                                    ".mtx")) {
        std::cerr << "error: cannot write Matrix Market files under "
                  << o.matrix << "\n";
        return kExitIo;
      }
    }
    if (!export_matrix_market(mt.matrix(), o.matrix + "/W.mtx")) {
      std::cerr << "error: cannot write " << o.matrix << "/W.mtx\n";
      return kExitIo;
    }
    std::cout << "wrote M0/M1 per level and W under " << o.matrix << "\n";
  }
  return kExitOk;
}

int cmd_cond(const Options& o) {
  const NormKind norm = parse_norm(o.norm);
  if (norm == NormKind::H1Dual && o.levels > dual_level_cap)
    throw std::invalid_argument("--norm h1dual supports --levels up to " +
                                std::to_string(dual_level_cap));
  MeshHierarchy h(resolve_mesh(o.mesh));
  std::vector<CondRow> rows;
  bool converged = true;
  for (int J = 0; J <= o.levels; ++J) {
    CondResult r = wavelet_condition(h, J, norm, o.tol, o.seed);
    converged = converged && r.converged;
    rows.push_back({J, r});
  }
  if (o.out.empty()) {
    write_csv(std::cout, rows);
  } else {
    std::ofstream f(o.out);
    if (!f) {
      std::cerr << "error: cannot open " << o.out << " for writing\n";
      return kExitIo;
    }
    write_csv(f, rows);
    if (!f) {
      std::cerr << "error: failed writing " << o.out << "\n";
      return kExitIo;
    }
  }
  if (!o.matrix.empty()) {
    const auto G = wavelet_gram(h, o.levels, norm);
    if (!export_matrix_market(G, o.matrix)) {
      std::cerr << "error: cannot write " << o.matrix << "\n";
      return kExitIo;
    }
  }
  if (!converged) {
    std::cerr << "error: eigenvalue iteration did not converge to --tol "
              << o.tol << "\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_check(const Options& o) {
  MeshHierarchy h(resolve_mesh(o.mesh));
  h.ensure_level(o.levels);
  bool all = true;
  auto report = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    all = all && ok;
  };

  const RefElement& re = RefElement::instance();
  report(re.gram_Theta_PhiTilde().is_identity(),
         "reference pairing <Theta, PhiTilde> is the identity (exact)");
  report(re.lambda_min_positive(),
         "symmetrized <N, Ntilde> is positive definite (certified)");
  {
    const Eigen::MatrixXd G = re.gram_N_Ntilde().to_double();
    const Eigen::MatrixXd S = 0.5 * (G + G.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    report(std::abs(es.eigenvalues()[0] - re.lambda_min_sym()) <= 1e-12,
           "lambda_min agrees with the characteristic-polynomial bisection");
  }

  for (int j = 0; j < o.levels; ++j) {
    const std::string at = " at level " + std::to_string(j);
    const GlobalCollection theta = assemble(h, j, re.Theta(), "Theta");
    const GlobalCollection phit = assemble(h, j, re.PhiTilde(), "PhiTilde");
    report(global_gram(theta, phit).is_identity(),
           "assembled <Theta, PhiTilde> is the identity (exact)" + at);

    bool built = true;
    bool moments = true;
    bool supports = true;
    int hull_free = 0;
    try {
      const WaveletLevel w = build_wavelets(h, j);
      supports = check_supports(h, j, w).within_bounds;
      for (int y = 0; y < w.size(); ++y) {
        if (!support_avoids_gamma(h.level(j + 1), w.nodal_values[y])) continue;
        ++hull_free;
        const auto m = integrate_moments(h.level(j + 1), w.nodal_values[y]);
        if (m[0] != 0 || m[1] != 0 || m[2] != 0) moments = false;
      }
    } catch (const std::exception& e) {
      std::cout << "       " << e.what() << "\n";
      built = moments = supports = false;
    }
    report(built, "wavelet construction invariants" + at);
    report(moments, "vanishing moments exact for the " +
                        std::to_string(hull_free) +
                        " wavelets clear of Gamma" + at);
    report(supports, "support sizes within 7+valence / 9+valence and the "
                     "one-ring star" + at);
  }

  struct Named {
    const char* label;
    const LocalCollection* coll;
  };
  const LocalCollection theta_xi =
      LocalCollection::concat(re.Theta(), re.Xi());
  const Named collections[] = {{"N", &re.N()},
                               {"Ntilde", &re.Ntilde()},
                               {"Theta+Xi", &theta_xi}};
  for (const auto& [label, coll] : collections) {
    const EigenRange ref = reference_eigen_range(*coll);
    for (int j = 0; j < std::min(o.levels, 4); ++j) {
      const EigenRange g = collection_eigen_range(h, j, *coll);
      const bool ok = g.lambda_min >= ref.lambda_min - 1e-10 &&
                      g.lambda_max <= ref.lambda_max + 1e-10;
      report(ok, std::string("assembled ") + label +
                     " spectrum inside the reference spectrum at level " +
                     std::to_string(j));
    }
  }

  return all ? kExitOk : kExitInvariant;
}

int cmd_export(const Options& o) {
  const auto fail_io = [&]() {
    std::cerr << "error: cannot write " << o.matrix << "\n";
    return kExitIo;
  };
  MeshHierarchy h(resolve_mesh(o.mesh));
  Eigen::SparseMatrix<double> M;
  if (o.what == "g") {
    M = wavelet_gram(h, o.levels, parse_norm(o.norm));
  } else if (o.what == "w") {
    MultilevelTransform mt(h, o.levels);
    M = mt.matrix();
  } else if (o.what == "mixed") {
    h.ensure_level(o.levels + 1);
    M = mixed_mass(h, o.levels);
  } else {
    const RefElement& re = RefElement::instance();
    const LocalCollection* coll = nullptr;
    LocalCollection concat;
    if (o.what == "n") coll = &re.N();
    else if (o.what == "ntilde") coll = &re.Ntilde();
    else if (o.what == "theta") coll = &re.Theta();
    else if (o.what == "xi") coll = &re.Xi();
    else if (o.what == "theta-xi") {
      concat = LocalCollection::concat(re.Theta(), re.Xi());
      coll = &concat;
    } else {
      throw std::invalid_argument(
          "unknown --what '" + o.what +
          "' (expected g, w, mixed, n, ntilde, theta, xi, theta-xi)");
    }
    h.ensure_level(o.levels + 1);
    const GlobalCollection A = assemble(h, o.levels, *coll, o.what);
    M = global_gram(A, A).to_sparse();
  }
  if (!export_matrix_market(M, o.matrix)) return fail_io();
  std::cout << "wrote " << M.rows() << "x" << M.cols() << " matrix ("
            << M.nonZeros() << " entries) to " << o.matrix << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "femwave: biorthogonal piecewise-quadratic wavelets on triangulations"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&](CLI::App* c, bool with_norm) {
    c->add_option("--mesh", o.mesh,
                  "Bundled mesh (square, lshape) or mesh file path")
        ->capture_default_str();
    c->add_option("--levels", o.levels, "Refinement levels (>= 0)")
        ->capture_default_str();
    if (with_norm)
      c->add_option("--norm", o.norm, "Inner product: l2, h1, h1dual")
          ->capture_default_str();
    c->add_option("--tol", o.tol, "Eigenvalue iteration tolerance, in (0,1)")
        ->capture_default_str();
    c->add_option("--seed", o.seed, "Seed for the iteration start vector")
        ->capture_default_str();
    c->add_option("--threads", o.threads,
                  "Thread count for parallel sections (0 = default)")
        ->capture_default_str();
  };

  CLI::App* ref = app.add_subcommand(
      "ref-report", "Print the reference-element construction report");
  CLI::App* build = app.add_subcommand(
      "build", "Build the multilevel transform and report wavelet statistics");
  add_common(build, false);
  build->add_option("--export-mm", o.matrix,
                    "Directory for Matrix Market dumps of the two-level "
                    "blocks and W");
  CLI::App* cond = app.add_subcommand(
      "cond",
      "Condition numbers of the scaled wavelet Gram, one CSV row per level");
  add_common(cond, true);
  cond->add_option("--out", o.out, "CSV output path (stdout when omitted)");
  cond->add_option("--export-mm", o.matrix,
                   "Matrix Market dump of the top-level Gram");
  CLI::App* check =
      app.add_subcommand("check", "Run the invariant suite on a mesh");
  add_common(check, false);
  CLI::App* exp = app.add_subcommand(
      "export", "Export an assembled matrix in Matrix Market format");
  add_common(exp, true);
  exp->add_option("--what", o.what,
                  "g (scaled Gram), w (transform), mixed, or a collection "
                  "Gram: n, ntilde, theta, xi, theta-xi")
      ->capture_default_str();
  exp->add_option("--matrix", o.matrix, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    validate(o);
    if (ref->parsed()) return cmd_ref_report();
    if (build->parsed()) return cmd_build(o);
    if (cond->parsed()) return cmd_cond(o);
    if (check->parsed()) return cmd_check(o);
    if (exp->parsed()) return cmd_export(o);
    std::cerr << "usage error: no subcommand\n";
    return kExitUsage;
  } catch (const MeshError& e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return kExitInvariant;
  }
}
