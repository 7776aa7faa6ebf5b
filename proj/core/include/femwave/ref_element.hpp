// Reference-triangle data: node index sets, the local function collections
// (coarse quadratic nodals N, piecewise-linear nodals Ntilde on the red split,
// fine quadratic nodals Nf, and the biorthogonal pair Theta/PhiTilde with the
// detail collection Xi), exact inner products, and the S3 symmetry action.
//
// Everything here is exact rational and immutable after construction; the
// singleton is safe for concurrent reads.
#pragma once

#include <array>
#include <vector>

#include "femwave/rational.hpp"

namespace femwave {

// Barycentric point on the closed reference triangle (coordinates sum to 1).
struct Bary {
  std::array<Rat, 3> l;

  static Bary of(Rat a, Rat b, Rat c);

  bool operator==(const Bary& o) const { return l == o.l; }

  // 0: integer coordinates (vertices); 1: half-integer, not a vertex (edge
  // midpoints); 2: quarter-integer, neither (edge quarter-points and interior
  // points). Any other point is rejected with -1.
  int depth_class() const;

  // Image under a coordinate permutation: result[perm[i]] = l[i].
  Bary permuted(const std::array<int, 3>& perm) const;
};

// The six permutations of {0,1,2}; perm[i] is the image of coordinate i.
const std::array<std::array<int, 3>, 6>& s3_permutations();

enum class BasisTag {
  Quadratic6,       // quadratic nodal basis: 3 vertices + 3 edge midpoints
  PwLinear6,        // continuous piecewise linears on the red split: hats at the same 6 nodes
  FineQuadratic15,  // continuous piecewise quadratics on the red split: nodals at 15 fine nodes
};

int basis_node_count(BasisTag tag);
const std::vector<Bary>& basis_nodes(BasisTag tag);

// Canonical node lists. Vertex k is e_k; midpoint k is the midpoint of the
// edge opposite vertex k; quarter_near(i,j) = (3/4)V_i + (1/4)V_j; interior
// point k is the interior fine node nearest vertex k (its k-th coordinate
// is 1/2).
const std::vector<Bary>& nodes6();   // vertices 0..2, midpoints 3..5
const std::vector<Bary>& nodes15();  // nodes6 + quarters 6..11 + interior 12..14
Bary quarter_near(int i, int j);
Bary interior_near(int k);

struct RefFunction {
  BasisTag tag;
  std::vector<Rat> coeffs;  // indexed by basis_nodes(tag)
};

// Nodal collections over their canonical node lists (identity coefficients).
struct LocalCollection;
LocalCollection make_quadratic_nodals();     // N: quadratics at nodes6
LocalCollection make_split_linear_nodals();  // Ntilde: split hats at nodes6
LocalCollection make_fine_quadratic_nodals();  // Nf: fine quadratics at nodes15

// f composed with the coordinate permutation, expressed in the same basis.
RefFunction apply_symmetry(const RefFunction& f, const std::array<int, 3>& perm);

struct LocalCollection {
  BasisTag tag;
  std::vector<Bary> index;      // index points
  std::vector<RefFunction> fn;  // parallel to index

  int size() const { return static_cast<int>(index.size()); }
  int find(const Bary& p) const;  // -1 when absent
  const RefFunction& at(const Bary& p) const;

  // Coefficient matrix with one column per function.
  RatMat coeff_matrix() const;

  static LocalCollection concat(const LocalCollection& a, const LocalCollection& b);
};

// Mechanical checks of the structural collection properties:
// vanishing on faces not containing the index point, equivariance under all
// coordinate permutations, and linear independence.
bool check_vanishing(const LocalCollection& c);
bool check_symmetry(const LocalCollection& c);
bool check_independence(const LocalCollection& c);

// Integral of lambda1^a lambda2^b lambda3^c over the reference triangle,
// divided by its volume: 2 a! b! c! / (a+b+c+2)!.
Rat integrate_monomial(int a, int b, int c);

// Single-triangle mass matrices divided by the triangle volume, for the
// plain polynomial shapes (no red split), over the canonical node orders:
// quadratic x quadratic (6x6), quadratic x linear (6x3, linear nodal at the
// vertices), linear x linear (3x3).
const RatMat& quadratic_mass();
const RatMat& quadratic_linear_mass();
const RatMat& linear_mass();

// Values of f at the fifteen fine nodes (nodal traces on the red split).
std::vector<Rat> values_at_fine_nodes(const RefFunction& f);

// L2 inner products over the reference triangle, divided by its volume,
// computed exactly per red-refinement child. Entry (i,j) pairs A.fn[i] with
// B.fn[j].
RatMat gram(const LocalCollection& A, const LocalCollection& B);

// All reference data, computed once.
class RefElement {
 public:
  static const RefElement& instance();

  const LocalCollection& N() const { return N_; }             // quadratic nodals
  const LocalCollection& Ntilde() const { return Ntilde_; }   // split-linear hats
  const LocalCollection& Nf() const { return Nf_; }           // fine quadratic nodals
  const LocalCollection& Theta() const { return Theta_; }     // coarse-node collection
  const LocalCollection& Xi() const { return Xi_; }           // detail collection
  const LocalCollection& PhiTilde() const { return PhiTilde_; }

  const RatMat& gram_N_Ntilde() const { return gram_N_Ntilde_; }
  const RatMat& gram_Theta_PhiTilde() const { return gram_Theta_PhiTilde_; }
  const RatMat& gram_Xi_PhiTilde() const { return gram_Xi_PhiTilde_; }

  // The combined Theta|Xi coefficient matrix over the fine nodal basis
  // (15 x 15, columns are functions) and its determinant.
  const RatMat& theta_xi_matrix() const { return theta_xi_matrix_; }
  const Rat& theta_xi_determinant() const { return theta_xi_det_; }

  // Smallest eigenvalue of the symmetrized cross Gram (exact bisection,
  // interval width 1e-14), with its positivity certificate.
  double lambda_min_sym() const { return lambda_min_sym_; }
  bool lambda_min_positive() const { return lambda_min_positive_; }

  // Values at the quadratic nodes of the coarse quadratic basis functions,
  // used to build prolongation stencils: entry (fine node, coarse fn).
  const RatMat& quadratic_values_at_fine_nodes() const { return p2_values_fine_; }

 private:
  RefElement();

  LocalCollection N_, Ntilde_, Nf_, Theta_, Xi_, PhiTilde_;
  RatMat gram_N_Ntilde_, gram_Theta_PhiTilde_, gram_Xi_PhiTilde_;
  RatMat theta_xi_matrix_;
  Rat theta_xi_det_;
  double lambda_min_sym_ = 0.0;
  bool lambda_min_positive_ = false;
  RatMat p2_values_fine_;
};

// Reconstructs Theta (indexed by vertices and midpoints) and Xi (indexed by
// quarter and interior points) from the published coefficient table by
// searching the symmetry-consistent node orderings until vanishing,
// equivariance, biorthogonality with the derived dual collection, and the
// published cross-Gram values all hold. Throws std::runtime_error when no
// (or more than one) consistent assignment exists.
std::pair<LocalCollection, LocalCollection> build_theta_xi();

// Solves for the dual collection inside the split-linear space: the
// vanishing and symmetry constraints leave three scalars (vertex function's
// value at its own vertex and at the midpoints of its two edges; midpoint
// function's value at its own midpoint), determined by biorthogonality with
// Theta. Throws std::runtime_error when the overdetermined system is
// inconsistent or the result does not span the space.
LocalCollection build_phi_tilde(const LocalCollection& theta);

}  // namespace femwave
