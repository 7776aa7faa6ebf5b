#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"
#include "femwave/wavelets.hpp"

namespace femwave {

// --------------------------------------------------------------------------
// Assembled finite element matrices (double precision). Degrees of freedom
// are the off-Gamma P2 nodes (quadratics) or off-Gamma vertices (linears) of
// the mesh, ascending by node id.
// --------------------------------------------------------------------------

Eigen::SparseMatrix<double> p2_mass(const Triangulation& mesh);
Eigen::SparseMatrix<double> p2_stiffness(const Triangulation& mesh);
Eigen::SparseMatrix<double> p1_stiffness(const Triangulation& mesh);

// Pairing of the level-j quadratics with the hats on the level-(j+1) mesh,
// both vanishing on Gamma. Rows and columns share one dof set (the P2 nodes
// of level j are the vertices of level j+1), so the matrix is square.
Eigen::SparseMatrix<double> mixed_mass(const MeshHierarchy& h, int j);

// --------------------------------------------------------------------------
// Extremal eigenvalue estimation.
// --------------------------------------------------------------------------

struct CondResult {
  double kappa = 1.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int iters = 0;
  bool converged = true;
};

// Lanczos iteration with full reorthogonalization for a symmetric positive
// definite operator of size n. Deterministic for a fixed seed. `converged`
// is false when the Ritz residuals of the extremal pair still exceed the
// tolerance after max_iters steps.
CondResult lanczos_condition(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op, int n,
    double tol = 1e-6, std::uint64_t seed = 1, int max_iters = 2000);

// Exact dense counterpart (for oracles and small problems).
CondResult dense_condition(const Eigen::MatrixXd& G);

// --------------------------------------------------------------------------
// Condition numbers of the diagonally rescaled wavelet Gram matrices.
// --------------------------------------------------------------------------

enum class NormKind { L2, H1, H1Dual };

// Parses "l2" / "h1" / "h1dual"; throws std::invalid_argument otherwise.
NormKind parse_norm(const std::string& name);
std::string norm_name(NormKind norm);

// Condition number of D <Psi, Psi> D up to `levels`, where the pairing is the
// L2 or H1 inner product of the primal wavelets, or the H1 inner product of
// the dual wavelets. The dual norm is available for levels <= dual_level_cap
// (throws std::invalid_argument above it) because it solves with the inverse
// transform level by level.
inline constexpr int dual_level_cap = 6;
CondResult wavelet_condition(MeshHierarchy& h, int levels, NormKind norm,
                             double tol = 1e-6, std::uint64_t seed = 1);

// Explicit scaled Gram matrix for export and dense cross-checks. Primal
// norms stay sparse; the dual norm is formed densely and is limited to
// max_dense rows (throws std::runtime_error above it).
Eigen::SparseMatrix<double> wavelet_gram(MeshHierarchy& h, int levels,
                                         NormKind norm, int max_dense = 3000);

// --------------------------------------------------------------------------
// Extremal eigenvalues of collection Gram matrices. The assembled, scaled
// Gram of any reference collection has its spectrum contained in the
// reference (single-triangle, volume-normalized) spectrum; these helpers
// feed that containment check.
// --------------------------------------------------------------------------

struct EigenRange {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

// Spectrum bounds of the volume-normalized single-triangle Gram.
EigenRange reference_eigen_range(const LocalCollection& coll);

// Extremal eigenvalues of the assembled scaled Gram at level j (dense for
// small sizes, Lanczos otherwise).
EigenRange collection_eigen_range(MeshHierarchy& h, int j,
                                  const LocalCollection& coll,
                                  double tol = 1e-8);

// --------------------------------------------------------------------------
// Output helpers.
// --------------------------------------------------------------------------

struct CondRow {
  int level = 0;
  CondResult result;
};

// CSV with header "J,kappa,lambda_min,lambda_max,iters", values at %.10g.
void write_csv(std::ostream& out, const std::vector<CondRow>& rows);

// Matrix Market export; returns false when the file cannot be written.
bool export_matrix_market(const Eigen::SparseMatrix<double>& M,
                          const std::string& path);

}  // namespace femwave
