// Exact rational scalars and small dense rational matrices.
//
// All reference-element data and all per-triangle element matrices are exact
// rationals; floating point appears only in the global spectral computations.
// The dense kernel here is deliberately small: Gaussian elimination, an exact
// characteristic polynomial (Faddeev-LeVerrier), and a Sturm-sequence
// bisection used as an independent oracle for smallest eigenvalues of
// symmetric rational matrices.
#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace femwave {

using Rat = mpq_class;

inline double to_double(const Rat& r) { return r.get_d(); }

// Parses "p/q", "p", or a plain decimal like "-0.625" into an exact rational.
// Returns std::nullopt on malformed input.
std::optional<Rat> parse_rational(const std::string& token);

// Renders as "p/q" (or "p" when the denominator is 1).
std::string to_string(const Rat& r);

class RatMat {
 public:
  RatMat() : rows_(0), cols_(0) {}
  RatMat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}

  static RatMat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  Rat& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  const Rat& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

  RatMat transposed() const;
  RatMat operator*(const RatMat& rhs) const;
  RatMat operator+(const RatMat& rhs) const;
  RatMat operator-(const RatMat& rhs) const;
  RatMat scaled(const Rat& s) const;
  bool operator==(const RatMat& rhs) const;

  bool is_zero() const;
  bool is_identity() const;

  // Exact determinant (square matrices).
  Rat determinant() const;

  // Solves A X = B exactly; nullopt when A is singular. A must be square.
  static std::optional<RatMat> solve(const RatMat& A, const RatMat& B);
  std::optional<RatMat> inverse() const;

  // Solves a possibly overdetermined system A x = b exactly.
  // Returns nullopt when the system is inconsistent or rank-deficient.
  static std::optional<std::vector<Rat>> solve_overdetermined(const RatMat& A,
                                                              const std::vector<Rat>& b);

  // Coefficients of det(t*I - A), monic, index k = coefficient of t^k
  // (so coeffs.size() == n+1 and coeffs[n] == 1). Faddeev-LeVerrier.
  std::vector<Rat> char_poly() const;

  Eigen::MatrixXd to_double() const;

 private:
  int rows_, cols_;
  std::vector<Rat> a_;
};

// Number of roots of the polynomial that are <= t, counted without
// multiplicity, via a Sturm chain. `monic` holds coefficients by increasing
// degree. Intended for characteristic polynomials of symmetric matrices
// (all roots real).
int count_roots_leq(const std::vector<Rat>& monic, const Rat& t);

// Smallest root of a monic polynomial with all-real roots, bracketed by
// Gershgorin-type bounds [lo, hi] and bisected to width `width`.
Rat smallest_root(const std::vector<Rat>& monic, Rat lo, Rat hi, const Rat& width);

// Smallest eigenvalue of a symmetric rational matrix, certified by the exact
// characteristic-polynomial/Sturm route; the bisection interval is narrowed
// below `width`. Also usable as a positivity certificate: `positive` is set
// to whether no root lies in (-inf, 0].
Rat symmetric_lambda_min(const RatMat& S, const Rat& width, bool* positive = nullptr);

}  // namespace femwave
