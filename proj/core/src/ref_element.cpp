#include "femwave/ref_element.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace femwave {
namespace {

Rat rat(const char* s) {
  auto v = parse_rational(s);
  if (!v) throw std::logic_error(std::string("bad rational literal: ") + s);
  return *v;
}

int find_node(const std::vector<Bary>& nodes, const Bary& p) {
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k)
    if (nodes[k] == p) return k;
  return -1;
}

// ---------------------------------------------------------------------------
// Exact polynomial helpers in barycentric coordinates.

struct Mono {
  Rat c;
  std::array<int, 3> e;
};
using Poly = std::vector<Mono>;

// Quadratic nodal basis on nodes6: vertex k -> 2*l_k^2 - l_k,
// midpoint k (index 3+k) -> 4*l_i*l_j over the edge opposite vertex k.
Poly quadratic_basis(int k) {
  Poly p;
  if (k < 3) {
    std::array<int, 3> sq{0, 0, 0};
    sq[k] = 2;
    std::array<int, 3> lin{0, 0, 0};
    lin[k] = 1;
    p.push_back({Rat(2), sq});
    p.push_back({Rat(-1), lin});
  } else {
    const int opp = k - 3;
    std::array<int, 3> e{1, 1, 1};
    e[opp] = 0;
    p.push_back({Rat(4), e});
  }
  return p;
}

Poly linear_basis(int i) {
  std::array<int, 3> e{0, 0, 0};
  e[i] = 1;
  return {{Rat(1), e}};
}

Rat eval_poly(const Poly& p, const Bary& x) {
  Rat v(0);
  for (const auto& m : p) {
    Rat t = m.c;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < m.e[i]; ++k) t *= x.l[i];
    v += t;
  }
  return v;
}

Rat integrate_product(const Poly& f, const Poly& g) {
  Rat v(0);
  for (const auto& a : f)
    for (const auto& b : g)
      v += a.c * b.c *
           integrate_monomial(a.e[0] + b.e[0], a.e[1] + b.e[1], a.e[2] + b.e[2]);
  return v;
}

// ---------------------------------------------------------------------------
// Per-child restriction machinery for exact Grams over the red split.

enum class Shape { P2, P1 };

Shape shape_of(BasisTag tag) {
  return tag == BasisTag::PwLinear6 ? Shape::P1 : Shape::P2;
}

Poly shape_basis(Shape s, int k) {
  return s == Shape::P2 ? quadratic_basis(k) : linear_basis(k);
}

int shape_node_count(Shape s) { return s == Shape::P2 ? 6 : 3; }

// Single-triangle mass matrix between two polynomial shapes, divided by the
// triangle volume.
RatMat shape_mass(Shape a, Shape b) {
  const int na = shape_node_count(a), nb = shape_node_count(b);
  RatMat m(na, nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      m(i, j) = integrate_product(shape_basis(a, i), shape_basis(b, j));
  return m;
}

Bary midpoint(const Bary& a, const Bary& b) {
  return Bary::of((a.l[0] + b.l[0]) / 2, (a.l[1] + b.l[1]) / 2,
                  (a.l[2] + b.l[2]) / 2);
}

// Vertices of the four red-refinement children in parent coordinates:
// corner child at each vertex, then the central child made of the midpoints.
std::array<std::array<Bary, 3>, 4> child_vertices() {
  const auto& n6 = nodes6();
  const Bary &v0 = n6[0], &v1 = n6[1], &v2 = n6[2];
  const Bary &m0 = n6[3], &m1 = n6[4], &m2 = n6[5];
  return {{{v0, m2, m1}, {v1, m0, m2}, {v2, m1, m0}, {m0, m1, m2}}};
}

std::vector<Bary> child_shape_nodes(Shape s, const std::array<Bary, 3>& v) {
  std::vector<Bary> pts{v[0], v[1], v[2]};
  if (s == Shape::P2) {
    pts.push_back(midpoint(v[1], v[2]));
    pts.push_back(midpoint(v[2], v[0]));
    pts.push_back(midpoint(v[0], v[1]));
  }
  return pts;
}

// Values of the parent basis functions of `tag` at the child's shape nodes.
RatMat restriction(BasisTag tag, const std::array<Bary, 3>& v) {
  const Shape s = shape_of(tag);
  const auto pts = child_shape_nodes(s, v);
  const int n = basis_node_count(tag);
  RatMat r(static_cast<int>(pts.size()), n);
  for (int m = 0; m < r.rows(); ++m) {
    if (tag == BasisTag::Quadratic6) {
      for (int k = 0; k < n; ++k) r(m, k) = eval_poly(quadratic_basis(k), pts[m]);
    } else {
      // Nodal on the split: the child's shape nodes are canonical nodes.
      const int idx = find_node(basis_nodes(tag), pts[m]);
      if (idx < 0) throw std::logic_error("child node missing from basis node list");
      r(m, idx) = Rat(1);
    }
  }
  return r;
}

// Gram matrix between the raw bases of two tags, divided by the parent
// volume, assembled exactly child by child.
const RatMat& base_gram(BasisTag a, BasisTag b) {
  struct Cache {
    std::array<std::array<RatMat, 3>, 3> g;
    Cache() {
      const BasisTag tags[3] = {BasisTag::Quadratic6, BasisTag::PwLinear6,
                                BasisTag::FineQuadratic15};
      const auto children = child_vertices();
      for (int ia = 0; ia < 3; ++ia)
        for (int ib = 0; ib < 3; ++ib) {
          const BasisTag ta = tags[ia], tb = tags[ib];
          RatMat sum(basis_node_count(ta), basis_node_count(tb));
          const RatMat mass = shape_mass(shape_of(ta), shape_of(tb));
          for (const auto& ch : children) {
            const RatMat ra = restriction(ta, ch);
            const RatMat rb = restriction(tb, ch);
            sum = sum + (ra.transposed() * mass * rb).scaled(Rat(1, 4));
          }
          g[ia][ib] = sum;
        }
    }
  };
  static const Cache cache;
  auto slot = [](BasisTag t) {
    switch (t) {
      case BasisTag::Quadratic6: return 0;
      case BasisTag::PwLinear6: return 1;
      default: return 2;
    }
  };
  return cache.g[slot(a)][slot(b)];
}

int matrix_rank(const RatMat& m) {
  std::vector<std::vector<Rat>> a(m.rows(), std::vector<Rat>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) a[i][j] = m(i, j);
  int rank = 0;
  for (int col = 0; col < m.cols() && rank < m.rows(); ++col) {
    int piv = -1;
    for (int r = rank; r < m.rows(); ++r)
      if (a[r][col] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    std::swap(a[rank], a[piv]);
    for (int r = rank + 1; r < m.rows(); ++r) {
      if (a[r][col] == 0) continue;
      const Rat f = a[r][col] / a[rank][col];
      for (int j = col; j < m.cols(); ++j) a[r][j] -= f * a[rank][j];
    }
    ++rank;
  }
  return rank;
}

// ---------------------------------------------------------------------------
// Face incidence. Faces 0..2 are the vertices, 3..5 the closed edges
// (edge f is the zero set of coordinate f-3).

unsigned face_mask(const Bary& p) {
  unsigned m = 0;
  for (int f = 0; f < 3; ++f)
    if (p == nodes6()[f]) m |= 1u << f;
  for (int f = 0; f < 3; ++f)
    if (p.l[f] == 0) m |= 1u << (3 + f);
  return m;
}

// Classify a depth-2 node: quarter point (3/4 at near, 1/4 at far) or
// interior point (1/2 at k).
bool classify_quarter(const Bary& p, int* near, int* far) {
  int zero = -1;
  for (int t = 0; t < 3; ++t)
    if (p.l[t] == 0) zero = t;
  if (zero < 0) return false;
  for (int t = 0; t < 3; ++t) {
    if (t == zero) continue;
    if (p.l[t] == Rat(3, 4))
      *near = t;
    else if (p.l[t] == Rat(1, 4))
      *far = t;
    else
      return false;
  }
  return true;
}

bool classify_interior(const Bary& p, int* k) {
  for (int t = 0; t < 3; ++t)
    if (p.l[t] == 0) return false;
  for (int t = 0; t < 3; ++t)
    if (p.l[t] == Rat(1, 2)) {
      *k = t;
      return true;
    }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bary

Bary Bary::of(Rat a, Rat b, Rat c) {
  Bary p{{std::move(a), std::move(b), std::move(c)}};
  if (p.l[0] + p.l[1] + p.l[2] != 1)
    throw std::invalid_argument("barycentric coordinates must sum to 1");
  for (const Rat& v : p.l)
    if (v < 0 || v > 1)
      throw std::invalid_argument("barycentric coordinates must lie in [0,1]");
  return p;
}

int Bary::depth_class() const {
  bool has_half = false, has_quarter = false;
  for (const Rat& v : l) {
    const mpz_class d = v.get_den();
    if (d == 1) continue;
    if (d == 2)
      has_half = true;
    else if (d == 4)
      has_quarter = true;
    else
      return -1;
  }
  if (has_quarter) return 2;
  return has_half ? 1 : 0;
}

Bary Bary::permuted(const std::array<int, 3>& perm) const {
  Bary r{};
  for (int i = 0; i < 3; ++i) r.l[perm[i]] = l[i];
  return r;
}

const std::array<std::array<int, 3>, 6>& s3_permutations() {
  static const std::array<std::array<int, 3>, 6> perms = {{{0, 1, 2},
                                                           {0, 2, 1},
                                                           {1, 0, 2},
                                                           {1, 2, 0},
                                                           {2, 0, 1},
                                                           {2, 1, 0}}};
  return perms;
}

// ---------------------------------------------------------------------------
// Canonical node lists.

Bary quarter_near(int i, int j) {
  if (i == j || i < 0 || j < 0 || i > 2 || j > 2)
    throw std::invalid_argument("quarter_near needs two distinct vertex ids");
  std::array<Rat, 3> l{Rat(0), Rat(0), Rat(0)};
  l[i] = Rat(3, 4);
  l[j] = Rat(1, 4);
  return Bary::of(l[0], l[1], l[2]);
}

Bary interior_near(int k) {
  std::array<Rat, 3> l{Rat(1, 4), Rat(1, 4), Rat(1, 4)};
  l[k] = Rat(1, 2);
  return Bary::of(l[0], l[1], l[2]);
}

const std::vector<Bary>& nodes6() {
  static const std::vector<Bary> nodes = [] {
    std::vector<Bary> n;
    n.push_back(Bary::of(1, 0, 0));
    n.push_back(Bary::of(0, 1, 0));
    n.push_back(Bary::of(0, 0, 1));
    n.push_back(Bary::of(0, Rat(1, 2), Rat(1, 2)));
    n.push_back(Bary::of(Rat(1, 2), 0, Rat(1, 2)));
    n.push_back(Bary::of(Rat(1, 2), Rat(1, 2), 0));
    return n;
  }();
  return nodes;
}

const std::vector<Bary>& nodes15() {
  static const std::vector<Bary> nodes = [] {
    std::vector<Bary> n = nodes6();
    // Edge k (opposite vertex k) carries the quarter points near each of its
    // endpoints, in cyclic endpoint order.
    for (int k = 0; k < 3; ++k) {
      const int i = (k + 1) % 3, j = (k + 2) % 3;
      n.push_back(quarter_near(i, j));
      n.push_back(quarter_near(j, i));
    }
    for (int k = 0; k < 3; ++k) n.push_back(interior_near(k));
    return n;
  }();
  return nodes;
}

int basis_node_count(BasisTag tag) {
  return tag == BasisTag::FineQuadratic15 ? 15 : 6;
}

const std::vector<Bary>& basis_nodes(BasisTag tag) {
  return tag == BasisTag::FineQuadratic15 ? nodes15() : nodes6();
}

// ---------------------------------------------------------------------------
// RefFunction / LocalCollection

RefFunction apply_symmetry(const RefFunction& f, const std::array<int, 3>& perm) {
  const auto& nodes = basis_nodes(f.tag);
  RefFunction g{f.tag, std::vector<Rat>(nodes.size())};
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
    const int src = find_node(nodes, nodes[k].permuted(perm));
    if (src < 0) throw std::logic_error("node list not closed under symmetry");
    g.coeffs[k] = f.coeffs[src];
  }
  return g;
}

int LocalCollection::find(const Bary& p) const { return find_node(index, p); }

const RefFunction& LocalCollection::at(const Bary& p) const {
  const int k = find(p);
  if (k < 0) throw std::out_of_range("index point not in collection");
  return fn[k];
}

RatMat LocalCollection::coeff_matrix() const {
  const int n = basis_node_count(tag);
  RatMat m(n, size());
  for (int j = 0; j < size(); ++j)
    for (int i = 0; i < n; ++i) m(i, j) = fn[j].coeffs[i];
  return m;
}

LocalCollection LocalCollection::concat(const LocalCollection& a,
                                        const LocalCollection& b) {
  if (a.tag != b.tag)
    throw std::invalid_argument("cannot concatenate collections over different bases");
  LocalCollection c{a.tag, a.index, a.fn};
  c.index.insert(c.index.end(), b.index.begin(), b.index.end());
  c.fn.insert(c.fn.end(), b.fn.begin(), b.fn.end());
  return c;
}

bool check_vanishing(const LocalCollection& c) {
  const auto& nodes = basis_nodes(c.tag);
  std::vector<unsigned> masks(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k) masks[k] = face_mask(nodes[k]);
  for (int i = 0; i < c.size(); ++i) {
    const unsigned own = face_mask(c.index[i]);
    for (size_t k = 0; k < nodes.size(); ++k)
      if (c.fn[i].coeffs[k] != 0 && (masks[k] & ~own)) return false;
  }
  return true;
}

bool check_symmetry(const LocalCollection& c) {
  for (const auto& perm : s3_permutations()) {
    for (int i = 0; i < c.size(); ++i) {
      const int j = c.find(c.index[i].permuted(perm));
      if (j < 0) return false;
      if (apply_symmetry(c.fn[j], perm).coeffs != c.fn[i].coeffs) return false;
    }
  }
  return true;
}

bool check_independence(const LocalCollection& c) {
  return matrix_rank(c.coeff_matrix()) == c.size();
}

// ---------------------------------------------------------------------------
// Exact integration and Grams.

Rat integrate_monomial(int a, int b, int c) {
  if (a < 0 || b < 0 || c < 0)
    throw std::invalid_argument("monomial exponents must be nonnegative");
  auto fact = [](int n) {
    mpz_class f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
  };
  Rat v(2 * fact(a) * fact(b) * fact(c), fact(a + b + c + 2));
  v.canonicalize();
  return v;
}

RatMat gram(const LocalCollection& A, const LocalCollection& B) {
  const RatMat& base = base_gram(A.tag, B.tag);
  return A.coeff_matrix().transposed() * base * B.coeff_matrix();
}

const RatMat& quadratic_mass() {
  static const RatMat m = shape_mass(Shape::P2, Shape::P2);
  return m;
}

const RatMat& quadratic_linear_mass() {
  static const RatMat m = shape_mass(Shape::P2, Shape::P1);
  return m;
}

const RatMat& linear_mass() {
  static const RatMat m = shape_mass(Shape::P1, Shape::P1);
  return m;
}

std::vector<Rat> values_at_fine_nodes(const RefFunction& f) {
  const auto& pts = nodes15();
  std::vector<Rat> vals(pts.size());
  switch (f.tag) {
    case BasisTag::FineQuadratic15:
      vals = f.coeffs;
      break;
    case BasisTag::Quadratic6:
      for (size_t m = 0; m < pts.size(); ++m) {
        Rat v(0);
        for (int k = 0; k < 6; ++k)
          if (f.coeffs[k] != 0) v += f.coeffs[k] * eval_poly(quadratic_basis(k), pts[m]);
        vals[m] = v;
      }
      break;
    case BasisTag::PwLinear6: {
      // Piecewise linear on the split: a fine node is either one of the six
      // coarse nodes or the average of the two coarse nodes of the fine edge
      // it bisects.
      const auto& n6 = nodes6();
      for (size_t m = 0; m < pts.size(); ++m) {
        const int own = find_node(n6, pts[m]);
        if (own >= 0) {
          vals[m] = f.coeffs[own];
          continue;
        }
        int a = -1, b = -1;
        if (classify_quarter(pts[m], &a, &b)) {
          // midpoint of [vertex a, midpoint of edge (a,b)]
          const int edge_mid = 3 + (3 - a - b);
          vals[m] = (f.coeffs[a] + f.coeffs[edge_mid]) / 2;
        } else if (classify_interior(pts[m], &a)) {
          // midpoint of the two edge midpoints adjacent to vertex a
          const int i = (a + 1) % 3, j = (a + 2) % 3;
          vals[m] = (f.coeffs[3 + i] + f.coeffs[3 + j]) / 2;
        } else {
          throw std::logic_error("unexpected fine node");
        }
      }
      break;
    }
  }
  return vals;
}

// ---------------------------------------------------------------------------
// Nodal collections.

namespace {
LocalCollection identity_collection(BasisTag tag) {
  const auto& nodes = basis_nodes(tag);
  LocalCollection c{tag, nodes, {}};
  for (size_t k = 0; k < nodes.size(); ++k) {
    RefFunction f{tag, std::vector<Rat>(nodes.size())};
    f.coeffs[k] = Rat(1);
    c.fn.push_back(std::move(f));
  }
  return c;
}
}  // namespace

LocalCollection make_quadratic_nodals() {
  return identity_collection(BasisTag::Quadratic6);
}
LocalCollection make_split_linear_nodals() {
  return identity_collection(BasisTag::PwLinear6);
}
LocalCollection make_fine_quadratic_nodals() {
  return identity_collection(BasisTag::FineQuadratic15);
}

// ---------------------------------------------------------------------------
// The published coefficient table. Rows and columns share one node ordering:
// rows carry nodal coefficients, columns the functions indexed at those same
// nodes (three vertices, three midpoints, six quarter points, three interior
// points). The node ordering itself is recovered by search below.

namespace {

const char* kPublished[15][15] = {
    {"72", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0"},
    {"0", "72", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0"},
    {"0", "0", "72", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0", "0"},
    {"0", "0", "0", "1560/81", "0", "0", "-12/25", "-12/25", "0", "0", "0", "0",
     "0", "0", "0"},
    {"0", "0", "0", "0", "1560/81", "0", "0", "0", "-12/25", "-12/25", "0", "0",
     "0", "0", "0"},
    {"0", "0", "0", "0", "0", "1560/81", "0", "0", "0", "0", "-12/25", "-12/25",
     "0", "0", "0"},
    {"0", "6", "0", "530/81", "0", "0", "1", "-2/25", "0", "0", "0", "0", "0",
     "0", "0"},
    {"0", "0", "6", "530/81", "0", "0", "-2/25", "1", "0", "0", "0", "0", "0",
     "0", "0"},
    {"0", "0", "6", "0", "530/81", "0", "0", "0", "1", "-2/25", "0", "0", "0",
     "0", "0"},
    {"6", "0", "0", "0", "530/81", "0", "0", "0", "-2/25", "1", "0", "0", "0",
     "0", "0"},
    {"6", "0", "0", "0", "0", "530/81", "0", "0", "0", "0", "1", "-2/25", "0",
     "0", "0"},
    {"0", "6", "0", "0", "0", "530/81", "0", "0", "0", "0", "-2/25", "1", "0",
     "0", "0"},
    {"0", "0", "0", "0", "50/81", "50/81", "0", "0", "1/25", "-8/25", "-8/25",
     "1/25", "-5/4", "1", "1"},
    {"0", "0", "0", "50/81", "0", "50/81", "-8/25", "1/25", "0", "0", "1/25",
     "-8/25", "1", "-5/4", "1"},
    {"0", "0", "0", "50/81", "50/81", "0", "1/25", "-8/25", "-8/25", "1/25",
     "0", "0", "1", "1", "-5/4"},
};

RatMat published_matrix() {
  RatMat m(15, 15);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) m(i, j) = rat(kPublished[i][j]);
  return m;
}

// Reorder a collection so its functions follow the canonical node list.
LocalCollection canonicalize(const LocalCollection& c) {
  std::vector<int> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& nodes = nodes15();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return find_node(nodes, c.index[a]) < find_node(nodes, c.index[b]);
  });
  LocalCollection out{c.tag, {}, {}};
  for (int k : order) {
    out.index.push_back(c.index[k]);
    out.fn.push_back(c.fn[k]);
  }
  return out;
}

// Expected cross Gram of the detail collection against the dual collection:
// a quarter-point function pairs only with the dual at its near vertex
// (value 3/100); an interior function pairs with the dual at its nearest
// vertex (-1/48) and at the opposite edge midpoint (27/240).
bool cross_gram_matches(const LocalCollection& xi, const LocalCollection& phi,
                        const RatMat& g) {
  for (int y = 0; y < xi.size(); ++y) {
    std::vector<Rat> want(phi.size(), Rat(0));
    int a = -1, b = -1;
    if (classify_quarter(xi.index[y], &a, &b)) {
      const int col = phi.find(nodes6()[a]);
      if (col < 0) return false;
      want[col] = Rat(3, 100);
    } else if (classify_interior(xi.index[y], &a)) {
      const int vcol = phi.find(nodes6()[a]);
      const int mcol = phi.find(nodes6()[3 + a]);
      if (vcol < 0 || mcol < 0) return false;
      want[vcol] = Rat(-1, 48);
      want[mcol] = Rat(9, 80);
    } else {
      return false;
    }
    for (int x = 0; x < phi.size(); ++x)
      if (g(y, x) != want[x]) return false;
  }
  return true;
}

}  // namespace

LocalCollection build_phi_tilde(const LocalCollection& theta) {
  if (theta.tag != BasisTag::FineQuadratic15 || theta.size() != 6)
    throw std::invalid_argument("build_phi_tilde expects the six coarse-node functions");

  // Three coefficient patterns allowed by vanishing + symmetry: the vertex
  // function's own-vertex value, its value at the midpoints of the two edges
  // meeting that vertex, and the midpoint function's own-midpoint value.
  const auto& n6 = nodes6();
  std::array<LocalCollection, 3> pattern;
  for (auto& p : pattern) p = LocalCollection{BasisTag::PwLinear6, theta.index, {}};
  for (const Bary& x : theta.index) {
    std::array<RefFunction, 3> f;
    for (auto& g : f) g = RefFunction{BasisTag::PwLinear6, std::vector<Rat>(6)};
    const int d = x.depth_class();
    if (d == 0) {
      const int i = find_node(n6, x);
      f[0].coeffs[i] = Rat(1);
      for (int t = 0; t < 3; ++t)
        if (t != i) f[1].coeffs[3 + t] = Rat(1);
    } else if (d == 1) {
      f[2].coeffs[find_node(n6, x)] = Rat(1);
    } else {
      throw std::invalid_argument("index point is neither vertex nor midpoint");
    }
    for (int s = 0; s < 3; ++s) pattern[s].fn.push_back(std::move(f[s]));
  }

  // Biorthogonality <theta_i, phi_j> = delta_ij, linear in the three scalars.
  std::array<RatMat, 3> g;
  for (int s = 0; s < 3; ++s) g[s] = gram(theta, pattern[s]);
  RatMat sys(36, 3);
  std::vector<Rat> rhs(36);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const int r = 6 * i + j;
      for (int s = 0; s < 3; ++s) sys(r, s) = g[s](i, j);
      rhs[r] = (i == j) ? Rat(1) : Rat(0);
    }
  const auto sol = RatMat::solve_overdetermined(sys, rhs);
  if (!sol) throw std::runtime_error("no dual collection solves biorthogonality");

  LocalCollection phi{BasisTag::PwLinear6, theta.index, {}};
  for (int k = 0; k < 6; ++k) {
    RefFunction f{BasisTag::PwLinear6, std::vector<Rat>(6)};
    for (int s = 0; s < 3; ++s)
      for (int t = 0; t < 6; ++t) f.coeffs[t] += (*sol)[s] * pattern[s].fn[k].coeffs[t];
    phi.fn.push_back(std::move(f));
  }
  if (!gram(theta, phi).is_identity())
    throw std::runtime_error("dual collection fails exact biorthogonality");
  if (!check_vanishing(phi) || !check_symmetry(phi) || !check_independence(phi))
    throw std::runtime_error("dual collection violates structural properties");
  if (phi.coeff_matrix().determinant() == 0)
    throw std::runtime_error("dual collection does not span the split-linear space");
  return phi;
}

std::pair<LocalCollection, LocalCollection> build_theta_xi() {
  const RatMat pub = published_matrix();
  const auto& nodes = nodes15();

  std::vector<unsigned> masks(15);
  for (int k = 0; k < 15; ++k) masks[k] = face_mask(nodes[k]);
  std::array<std::vector<int>, 15> col_rows;
  for (int c = 0; c < 15; ++c)
    for (int r = 0; r < 15; ++r)
      if (pub(r, c) != 0) col_rows[c].push_back(r);

  // Node assignment: table position -> canonical node. The vertex block is
  // pinned (a global vertex relabeling never changes the resulting map, by
  // the symmetry property verified afterwards); midpoints, quarters and
  // interior points are searched.
  std::array<int, 15> node_of;
  node_of[0] = 0;
  node_of[1] = 1;
  node_of[2] = 2;

  std::vector<std::pair<RatMat, RatMat>> solutions;  // canonical coeff matrices
  LocalCollection best_theta, best_xi;

  std::array<int, 3> mid{0, 1, 2};
  do {
    std::array<int, 6> qtr{0, 1, 2, 3, 4, 5};
    std::array<int, 3> itr_init{0, 1, 2};
    do {
      std::array<int, 3> itr = itr_init;
      do {
        for (int t = 0; t < 3; ++t) node_of[3 + t] = 3 + mid[t];
        for (int t = 0; t < 6; ++t) node_of[6 + t] = 6 + qtr[t];
        for (int t = 0; t < 3; ++t) node_of[12 + t] = 12 + itr[t];

        bool ok = true;
        for (int c = 0; c < 15 && ok; ++c) {
          const unsigned own = masks[node_of[c]];
          for (int r : col_rows[c])
            if (masks[node_of[r]] & ~own) {
              ok = false;
              break;
            }
        }
        if (!ok) continue;

        LocalCollection theta{BasisTag::FineQuadratic15, {}, {}};
        LocalCollection xi{BasisTag::FineQuadratic15, {}, {}};
        for (int c = 0; c < 15; ++c) {
          RefFunction f{BasisTag::FineQuadratic15, std::vector<Rat>(15)};
          for (int r = 0; r < 15; ++r) f.coeffs[node_of[r]] = pub(r, c);
          auto& dst = (c < 6) ? theta : xi;
          dst.index.push_back(nodes[node_of[c]]);
          dst.fn.push_back(std::move(f));
        }
        theta = canonicalize(theta);
        xi = canonicalize(xi);
        if (!check_vanishing(theta) || !check_vanishing(xi)) continue;
        if (!check_symmetry(theta) || !check_symmetry(xi)) continue;

        LocalCollection phi;
        try {
          phi = build_phi_tilde(theta);
        } catch (const std::runtime_error&) {
          continue;
        }
        if (!cross_gram_matches(xi, phi, gram(xi, phi))) continue;
        const LocalCollection both = LocalCollection::concat(theta, xi);
        if (both.coeff_matrix().determinant() == 0) continue;

        const auto key = std::make_pair(theta.coeff_matrix(), xi.coeff_matrix());
        bool seen = false;
        for (const auto& s : solutions)
          if (s.first == key.first && s.second == key.second) seen = true;
        if (!seen) {
          solutions.push_back(key);
          best_theta = theta;
          best_xi = xi;
        }
      } while (std::next_permutation(itr.begin(), itr.end()));
    } while (std::next_permutation(qtr.begin(), qtr.end()));
  } while (std::next_permutation(mid.begin(), mid.end()));

  if (solutions.empty())
    throw std::runtime_error(
        "no node ordering reconciles the published table with the structural "
        "properties");
  if (solutions.size() > 1)
    throw std::runtime_error(
        "published table admits multiple inequivalent node orderings");
  return {best_theta, best_xi};
}

// ---------------------------------------------------------------------------
// RefElement

const RefElement& RefElement::instance() {
  static const RefElement inst;
  return inst;
}

RefElement::RefElement() {
  N_ = make_quadratic_nodals();
  Ntilde_ = make_split_linear_nodals();
  Nf_ = make_fine_quadratic_nodals();

  auto pair = build_theta_xi();
  Theta_ = std::move(pair.first);
  Xi_ = std::move(pair.second);
  PhiTilde_ = build_phi_tilde(Theta_);

  gram_N_Ntilde_ = gram(N_, Ntilde_);
  gram_Theta_PhiTilde_ = gram(Theta_, PhiTilde_);
  gram_Xi_PhiTilde_ = gram(Xi_, PhiTilde_);

  const LocalCollection both = LocalCollection::concat(Theta_, Xi_);
  theta_xi_matrix_ = both.coeff_matrix();
  theta_xi_det_ = theta_xi_matrix_.determinant();
  if (theta_xi_det_ == 0)
    throw std::runtime_error("combined collection is not a basis");

  const RatMat& g = gram_N_Ntilde_;
  const RatMat sym = (g + g.transposed()).scaled(Rat(1, 2));
  mpz_class w = 1;
  for (int k = 0; k < 14; ++k) w *= 10;
  bool positive = false;
  lambda_min_sym_ = to_double(symmetric_lambda_min(sym, Rat(mpz_class(1), w), &positive));
  lambda_min_positive_ = positive;

  p2_values_fine_ = RatMat(15, 6);
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 6; ++c)
      p2_values_fine_(r, c) = eval_poly(quadratic_basis(c), nodes15()[r]);
}

}  // namespace femwave
