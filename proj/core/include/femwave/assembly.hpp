// Local-to-global assembly: a local collection on the reference triangle is
// turned into a collection of global functions indexed by mesh nodes off the
// boundary-condition set, normalized per node by the inverse square root of
// its patch volume. Global Gram matrices factor exactly into that
// normalization and a rational part accumulated triangle by triangle.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"

namespace femwave {

struct ElementEntry {
  int local_fn;   // index into the local collection
  int global_fn;  // index into the global collection
};

struct GlobalCollection {
  std::string label;
  int level = 0;        // coarse level j; functions live on level j+1 nodes
  LocalCollection local;
  std::vector<int> index_nodes;  // level-(j+1) P2 node ids, ascending
  std::vector<Rat> patch_vol;    // level-j patch volume per function
  std::vector<std::vector<ElementEntry>> elements;  // per level-j triangle
  std::vector<Rat> tri_volume;                      // per level-j triangle
  // Nodal trace of each (un-normalized) function on level j+1, sparse and
  // sorted by node id. The normalized global function is patch_vol^{-1/2}
  // times this trace.
  std::vector<std::vector<std::pair<int, Rat>>> nodal_values;

  int size() const { return static_cast<int>(index_nodes.size()); }
  double mu(int f) const { return 1.0 / std::sqrt(to_double(patch_vol[f])); }
  int find_node(int node) const;  // global fn index for a node id, -1 if absent
};

// Builds the global collection for level j (requires level j+1 built).
// Asserts that per-node traces from different triangles agree (continuity)
// and that traces vanish on the boundary-condition set; violations throw.
GlobalCollection assemble(const MeshHierarchy& h, int j,
                          const LocalCollection& local, std::string label);

// Exact factored Gram: <a_i, b_k> = R(i,k) / sqrt(pv_row[i] * pv_col[k]).
struct FactoredGram {
  int rows = 0, cols = 0;
  std::vector<Rat> pv_row, pv_col;
  std::map<std::pair<int, int>, Rat> R;  // zero entries omitted
  bool identical_index = false;  // row and column index sets (and patches) coincide

  // Exact identity test: needs identical index sets; diag R == patch volume,
  // all off-diagonal entries zero.
  bool is_identity() const;
  bool is_zero() const;
  Eigen::SparseMatrix<double> to_sparse() const;
  Eigen::MatrixXd to_dense() const;
};

FactoredGram global_gram(const GlobalCollection& A, const GlobalCollection& B);

// Exact integrals of a nodal P2 trace against {1, x, y} over the given mesh.
std::array<Rat, 3> integrate_moments(const Triangulation& mesh,
                                     const std::vector<std::pair<int, Rat>>& nodal);

// Lower bound for the inf-sup constant of the pair (span A, span B):
// sigma_min(<A,B>) / sqrt(lmax(<A,A>) * lmax(<B,B>)), evaluated densely.
// Throws std::runtime_error when the collections exceed max_dense functions.
double infsup_bound(const GlobalCollection& A, const GlobalCollection& B,
                    int max_dense = 3000);

}  // namespace femwave
