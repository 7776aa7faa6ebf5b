#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <memory>
#include <utility>
#include <vector>

#include "femwave/assembly.hpp"
#include "femwave/mesh.hpp"
#include "femwave/rational.hpp"

namespace femwave {

// --------------------------------------------------------------------------
// Wavelets between consecutive levels.
//
// The detail functions between level j and level j+1 start from the detail
// collection Xi indexed by the off-Gamma edge nodes of the refined mesh
// (quarter points of coarse edges and interior points of coarse triangles).
// Each xi is corrected by coarse-collection functions so that it becomes
// orthogonal to the whole dual space (continuous piecewise linears on the
// refined mesh vanishing on Gamma):
//
//   psi_y = xi_y - sum_x <xi_y, dual_x> theta_x,
//
// which keeps the construction local: a quarter-point xi needs at most one
// correction (the coarse function at the nearby coarse vertex) and an
// interior xi at most two (the opposite corner vertex and the opposite edge
// midpoint). Corrections aimed at nodes on Gamma are dropped because those
// coarse functions are not part of the basis.
//
// All nodal traces are exact rationals; the usual patch-volume normalization
// mu(x) = patch_volume(x)^{-1/2} is applied only when forming floating-point
// transform matrices.
// --------------------------------------------------------------------------

enum class WaveletKind {
  Edge,      // indexed by a quarter point of a coarse edge
  Interior,  // indexed by an interior point of a coarse triangle
};

struct WaveletLevel {
  int level = 0;  // wavelets spanning the details between level-1 and level

  // Index nodes (P2 node ids of the level mesh, off Gamma, ascending) and the
  // coarse-patch volumes used for normalization.
  std::vector<int> index_nodes;
  std::vector<Rat> patch_vol;

  std::vector<WaveletKind> kind;
  std::vector<int> n_corrections;   // coarse functions subtracted
  std::vector<int> anchor_vertex;   // coarse vertex the wavelet sits next to

  // Unscaled rational nodal traces on the level mesh, sorted by node id.
  std::vector<std::vector<std::pair<int, Rat>>> nodal_values;

  int size() const { return static_cast<int>(index_nodes.size()); }
  double mu(int f) const;
  int support_nodes(int f) const {
    return static_cast<int>(nodal_values[f].size());
  }
};

// Builds the wavelets between levels j and j+1 (refining the hierarchy as
// needed). Verifies that the assembled coarse/dual pairing is exactly the
// identity before combining; throws std::runtime_error if any structural
// invariant fails.
WaveletLevel build_wavelets(MeshHierarchy& h, int j);

// Support validation: every wavelet must live inside the one-ring star of its
// home coarse triangles, with node counts bounded by 7 + valence(anchor) for
// the edge kind and 9 + valence(anchor) for the interior kind.
struct SupportReport {
  int max_edge_nodes = 0;
  int max_interior_nodes = 0;
  int max_edge_bound = 0;      // largest applicable edge-kind bound
  int max_interior_bound = 0;  // largest applicable interior-kind bound
  bool within_bounds = true;
};
SupportReport check_supports(const MeshHierarchy& h, int j,
                             const WaveletLevel& w);

// True when the closure of the function's support — the union of the mesh
// triangles on which some of its nodal values is nonzero — contains no Gamma
// vertex. Functions with this property keep exact vanishing moments because
// their dual-space orthogonality is not clipped by the boundary.
bool support_avoids_gamma(const Triangulation& mesh,
                          const std::vector<std::pair<int, Rat>>& nodal);

// --------------------------------------------------------------------------
// Multilevel transform. Coefficients are laid out as
//   [ level-0 scaling block | details level 1 | ... | details level J ],
// and the synthesis W maps them to nodal coordinates of the level-J space.
// --------------------------------------------------------------------------

class MultilevelTransform {
 public:
  MultilevelTransform(MeshHierarchy& h, int levels);

  int max_level() const { return J_; }
  int space_dim(int j) const { return space_dim_.at(j); }
  int detail_dim(int j) const { return wl_.at(j - 1).size(); }
  int coeff_dim() const { return space_dim_.back(); }
  // Start of a coefficient block: j = 0 is the scaling block, j >= 1 the
  // detail block of level j.
  int block_offset(int j) const;

  const Eigen::VectorXd& level0_scaling() const { return mu0_; }
  // Nodal prolongation from level j to level j+1 (0 <= j < J).
  const Eigen::SparseMatrix<double>& prolongation(int j) const {
    return prolong_.at(j);
  }
  // Scaled wavelet columns of level j (1 <= j <= J) in level-j nodal coords.
  const Eigen::SparseMatrix<double>& detail_columns(int j) const {
    return detail_.at(j - 1);
  }
  const WaveletLevel& wavelets(int j) const { return wl_.at(j - 1); }

  Eigen::VectorXd synthesis(const Eigen::VectorXd& coeffs) const;   // W c
  Eigen::VectorXd analysis(const Eigen::VectorXd& nodal) const;     // W^{-1} x
  Eigen::VectorXd synthesis_transpose(const Eigen::VectorXd& nodal) const;
  Eigen::VectorXd analysis_transpose(const Eigen::VectorXd& coeffs) const;

  // Column-wise variants of the four maps, for batched right-hand sides.
  Eigen::MatrixXd synthesis(const Eigen::MatrixXd& coeffs) const;
  Eigen::MatrixXd analysis(const Eigen::MatrixXd& nodal) const;
  Eigen::MatrixXd synthesis_transpose(const Eigen::MatrixXd& nodal) const;
  Eigen::MatrixXd analysis_transpose(const Eigen::MatrixXd& coeffs) const;

  // Explicit sparse W, columns in coefficient layout order.
  Eigen::SparseMatrix<double> matrix() const;

 private:
  using Sparse = Eigen::SparseMatrix<double>;
  // Lazily cached factorization of [P | D]; mutable ref because Eigen's
  // transpose-solve view is a non-const member.
  Eigen::SparseLU<Sparse>& lu(int j) const;

  int J_ = 0;
  std::vector<int> space_dim_;   // j = 0..J
  std::vector<WaveletLevel> wl_; // level j stored at j-1
  Eigen::VectorXd mu0_;
  std::vector<Sparse> prolong_;  // j = 0..J-1
  std::vector<Sparse> detail_;   // level j stored at j-1
  mutable std::vector<std::unique_ptr<Eigen::SparseLU<Sparse>>> lu_;
};

// --------------------------------------------------------------------------
// Two-level dual transform. With the scaled coarse columns M0 and the scaled
// detail columns R1 in level-(j+1) nodal coordinates, and C the pairing of
// the details against the coarse duals, the forward two-level map is
//   M = [M0 | R1] * [[I, -C], [0, I]]       (columns: coarse | wavelets)
// and its inverse transpose factors as
//   Mt = [M0 | R1]^{-T} * [[I, 0], [C^T, I]].
// Mt's trailing columns are the nodal coordinates of the dual wavelets.
// --------------------------------------------------------------------------

struct TwoLevelDual {
  Eigen::MatrixXd forward;  // M, square of size dim(level j+1)
  Eigen::MatrixXd dual;     // Mt = M^{-T}
  int n_coarse = 0;         // leading column count (coarse block)
};
TwoLevelDual dual_two_level(MeshHierarchy& h, int j, int max_dense = 4000);

// --------------------------------------------------------------------------
// Angle diagnostics between assembled collections, from dense Gram matrices:
// the singular values of chol(GA)^{-1} GAB chol(GB)^{-T} are the cosines of
// the principal angles between the two spans.
// --------------------------------------------------------------------------

struct SingularRange {
  double smallest = 0.0;
  double largest = 0.0;
};
SingularRange whitened_singular_range(const Eigen::MatrixXd& GA,
                                      const Eigen::MatrixXd& GAB,
                                      const Eigen::MatrixXd& GB);

struct AngleConstants {
  double delta = 0.0;    // inf-sup angle: coarse collection vs dual space
  double epsilon = 0.0;  // sup cos-angle: coarse collection vs detail span
};
// Assembled constants at level j; throws std::runtime_error when the dense
// computation would exceed max_dense rows.
AngleConstants angle_constants(MeshHierarchy& h, int j, int max_dense = 3000);
// Single-triangle counterparts from the reference collections.
AngleConstants local_angle_constants();

}  // namespace femwave
