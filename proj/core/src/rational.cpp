#include "femwave/rational.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace femwave {

std::optional<Rat> parse_rational(const std::string& token) {
  if (token.empty()) return std::nullopt;
  const auto digits_only = [](const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  std::string body = token;
  bool neg = false;
  if (body[0] == '+' || body[0] == '-') {
    neg = body[0] == '-';
    body = body.substr(1);
  }
  const auto slash = body.find('/');
  const auto dot = body.find('.');
  Rat value;
  if (slash != std::string::npos) {
    if (dot != std::string::npos) return std::nullopt;
    const std::string num = body.substr(0, slash), den = body.substr(slash + 1);
    if (!digits_only(num) || !digits_only(den)) return std::nullopt;
    mpz_class d(den);
    if (d == 0) return std::nullopt;
    value = Rat(mpz_class(num), d);
  } else if (dot != std::string::npos) {
    const std::string ip = body.substr(0, dot), fp = body.substr(dot + 1);
    if (ip.empty() && fp.empty()) return std::nullopt;
    if (!ip.empty() && !digits_only(ip)) return std::nullopt;
    if (!fp.empty() && !digits_only(fp)) return std::nullopt;
    mpz_class scale = 1;
    for (size_t i = 0; i < fp.size(); ++i) scale *= 10;
    const mpz_class whole = ip.empty() ? mpz_class(0) : mpz_class(ip);
    const mpz_class frac = fp.empty() ? mpz_class(0) : mpz_class(fp);
    value = Rat(whole * scale + frac, scale);
  } else {
    if (!digits_only(body)) return std::nullopt;
    value = Rat(mpz_class(body));
  }
  value.canonicalize();
  if (neg) value = -value;
  return value;
}

std::string to_string(const Rat& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

RatMat RatMat::identity(int n) {
  RatMat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

RatMat RatMat::transposed() const {
  RatMat t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

RatMat RatMat::operator*(const RatMat& rhs) const {
  if (cols_ != rhs.rows_) throw std::invalid_argument("RatMat: dimension mismatch in product");
  RatMat out(rows_, rhs.cols_);
  for (int i = 0; i < rows_; ++i)
    for (int k = 0; k < cols_; ++k) {
      const Rat& aik = (*this)(i, k);
      if (aik == 0) continue;
      for (int j = 0; j < rhs.cols_; ++j) {
        if (rhs(k, j) == 0) continue;
        out(i, j) += aik * rhs(k, j);
      }
    }
  return out;
}

RatMat RatMat::operator+(const RatMat& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("RatMat: dimension mismatch in sum");
  RatMat out(rows_, cols_);
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] = a_[i] + rhs.a_[i];
  return out;
}

RatMat RatMat::operator-(const RatMat& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("RatMat: dimension mismatch in difference");
  RatMat out(rows_, cols_);
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] = a_[i] - rhs.a_[i];
  return out;
}

RatMat RatMat::scaled(const Rat& s) const {
  RatMat out(rows_, cols_);
  for (size_t i = 0; i < a_.size(); ++i) out.a_[i] = a_[i] * s;
  return out;
}

bool RatMat::operator==(const RatMat& rhs) const {
  return rows_ == rhs.rows_ && cols_ == rhs.cols_ && a_ == rhs.a_;
}

bool RatMat::is_zero() const {
  return std::all_of(a_.begin(), a_.end(), [](const Rat& x) { return x == 0; });
}

bool RatMat::is_identity() const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      if ((*this)(i, j) != (i == j ? 1 : 0)) return false;
  return true;
}

namespace {

// Reduces [A | B] in place by exact Gauss-Jordan elimination.
// Returns the pivot column list; rows beyond the rank are zero in A.
std::vector<int> gauss_jordan(RatMat& A, RatMat& B) {
  const int m = A.rows(), n = A.cols();
  std::vector<int> pivot_cols;
  int row = 0;
  for (int col = 0; col < n && row < m; ++col) {
    int piv = -1;
    for (int r = row; r < m; ++r)
      if (A(r, col) != 0) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    if (piv != row) {
      for (int j = 0; j < n; ++j) std::swap(A(piv, j), A(row, j));
      for (int j = 0; j < B.cols(); ++j) std::swap(B(piv, j), B(row, j));
    }
    const Rat inv = 1 / A(row, col);
    for (int j = 0; j < n; ++j) A(row, j) *= inv;
    for (int j = 0; j < B.cols(); ++j) B(row, j) *= inv;
    for (int r = 0; r < m; ++r) {
      if (r == row || A(r, col) == 0) continue;
      const Rat f = A(r, col);
      for (int j = 0; j < n; ++j) A(r, j) -= f * A(row, j);
      for (int j = 0; j < B.cols(); ++j) B(r, j) -= f * B(row, j);
    }
    pivot_cols.push_back(col);
    ++row;
  }
  return pivot_cols;
}

}  // namespace

Rat RatMat::determinant() const {
  if (rows_ != cols_) throw std::invalid_argument("RatMat: determinant of non-square matrix");
  RatMat A = *this;
  Rat det = 1;
  const int n = rows_;
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    for (int r = col; r < n; ++r)
      if (A(r, col) != 0) {
        piv = r;
        break;
      }
    if (piv < 0) return Rat(0);
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(A(piv, j), A(col, j));
      det = -det;
    }
    det *= A(col, col);
    const Rat inv = 1 / A(col, col);
    for (int r = col + 1; r < n; ++r) {
      if (A(r, col) == 0) continue;
      const Rat f = A(r, col) * inv;
      for (int j = col; j < n; ++j) A(r, j) -= f * A(col, j);
    }
  }
  return det;
}

std::optional<RatMat> RatMat::solve(const RatMat& A, const RatMat& B) {
  if (A.rows() != A.cols() || A.rows() != B.rows())
    throw std::invalid_argument("RatMat::solve: dimension mismatch");
  RatMat a = A, b = B;
  const auto pivots = gauss_jordan(a, b);
  if (static_cast<int>(pivots.size()) != A.cols()) return std::nullopt;
  return b;
}

std::optional<RatMat> RatMat::inverse() const {
  return solve(*this, identity(rows_));
}

std::optional<std::vector<Rat>> RatMat::solve_overdetermined(const RatMat& A,
                                                             const std::vector<Rat>& b) {
  if (static_cast<int>(b.size()) != A.rows())
    throw std::invalid_argument("RatMat::solve_overdetermined: dimension mismatch");
  RatMat a = A;
  RatMat rhs(A.rows(), 1);
  for (int i = 0; i < A.rows(); ++i) rhs(i, 0) = b[i];
  const auto pivots = gauss_jordan(a, rhs);
  if (static_cast<int>(pivots.size()) != A.cols()) return std::nullopt;  // rank-deficient
  // Consistency: rows beyond the rank must have zero right-hand side.
  for (int r = static_cast<int>(pivots.size()); r < A.rows(); ++r)
    if (rhs(r, 0) != 0) return std::nullopt;
  std::vector<Rat> x(A.cols());
  for (int r = 0; r < static_cast<int>(pivots.size()); ++r) x[pivots[r]] = rhs(r, 0);
  return x;
}

std::vector<Rat> RatMat::char_poly() const {
  if (rows_ != cols_) throw std::invalid_argument("RatMat: char_poly of non-square matrix");
  const int n = rows_;
  // Faddeev-LeVerrier: M_1 = A, c_{n-1} = -tr(M_1);
  // M_{k+1} = A (M_k + c_{n-k} I), c_{n-k-1} = -tr(M_{k+1})/(k+1).
  std::vector<Rat> c(n + 1);
  c[n] = 1;
  RatMat M = *this;
  for (int k = 1; k <= n; ++k) {
    if (k > 1) {
      RatMat shifted = M;
      for (int i = 0; i < n; ++i) shifted(i, i) += c[n - k + 1];
      M = (*this) * shifted;
    }
    Rat tr = 0;
    for (int i = 0; i < n; ++i) tr += M(i, i);
    c[n - k] = -tr / k;
  }
  return c;
}

Eigen::MatrixXd RatMat::to_double() const {
  Eigen::MatrixXd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = femwave::to_double((*this)(i, j));
  return m;
}

namespace {

using Poly = std::vector<Rat>;  // coefficients by increasing degree

void trim(Poly& p) {
  while (!p.empty() && p.back() == 0) p.pop_back();
}

Poly derivative(const Poly& p) {
  Poly d;
  for (size_t k = 1; k < p.size(); ++k) d.push_back(p[k] * static_cast<long>(k));
  return d;
}

// Remainder of a / b (b nonzero).
Poly poly_rem(Poly a, const Poly& b) {
  trim(a);
  while (a.size() >= b.size() && !a.empty()) {
    const Rat f = a.back() / b.back();
    const size_t shift = a.size() - b.size();
    for (size_t i = 0; i < b.size(); ++i) a[shift + i] -= f * b[i];
    trim(a);
  }
  return a;
}

Rat eval(const Poly& p, const Rat& t) {
  Rat v = 0;
  for (size_t k = p.size(); k-- > 0;) v = v * t + p[k];
  return v;
}

std::vector<Poly> sturm_chain(const Poly& p) {
  std::vector<Poly> chain;
  Poly a = p;
  trim(a);
  chain.push_back(a);
  Poly b = derivative(a);
  trim(b);
  while (!b.empty()) {
    chain.push_back(b);
    Poly r = poly_rem(a, b);
    for (auto& c : r) c = -c;
    a = std::move(b);
    b = std::move(r);
  }
  return chain;
}

int sign_changes(const std::vector<Poly>& chain, const Rat& t) {
  int changes = 0, prev = 0;
  for (const auto& p : chain) {
    const Rat v = eval(p, t);
    const int s = v > 0 ? 1 : (v < 0 ? -1 : 0);
    if (s == 0) continue;
    if (prev != 0 && s != prev) ++changes;
    prev = s;
  }
  return changes;
}

int changes_at_minus_inf(const std::vector<Poly>& chain) {
  int changes = 0, prev = 0;
  for (const auto& p : chain) {
    if (p.empty()) continue;
    const int deg = static_cast<int>(p.size()) - 1;
    int s = p.back() > 0 ? 1 : -1;
    if (deg % 2 == 1) s = -s;
    if (prev != 0 && s != prev) ++changes;
    prev = s;
  }
  return changes;
}

}  // namespace

int count_roots_leq(const std::vector<Rat>& monic, const Rat& t) {
  const auto chain = sturm_chain(monic);
  // Sturm: roots in (a, b] = V(a) - V(b); take a = -infinity.
  return changes_at_minus_inf(chain) - sign_changes(chain, t);
}

Rat smallest_root(const std::vector<Rat>& monic, Rat lo, Rat hi, const Rat& width) {
  const auto chain = sturm_chain(monic);
  const int v_minus_inf = changes_at_minus_inf(chain);
  const auto roots_leq = [&](const Rat& t) { return v_minus_inf - sign_changes(chain, t); };
  if (roots_leq(hi) == 0) throw std::invalid_argument("smallest_root: no root below upper bound");
  if (roots_leq(lo) != 0) throw std::invalid_argument("smallest_root: lower bound not below roots");
  while (hi - lo > width) {
    const Rat mid = (lo + hi) / 2;
    if (roots_leq(mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  return (lo + hi) / 2;
}

Rat symmetric_lambda_min(const RatMat& S, const Rat& width, bool* positive) {
  if (S.rows() != S.cols()) throw std::invalid_argument("symmetric_lambda_min: non-square");
  const int n = S.rows();
  // Gershgorin bracket.
  Rat lo = 0, hi = 0;
  for (int i = 0; i < n; ++i) {
    Rat radius = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) radius += abs(S(i, j));
    const Rat row_lo = S(i, i) - radius;
    const Rat row_hi = S(i, i) + radius;
    if (row_lo < lo) lo = row_lo;
    if (row_hi > hi) hi = row_hi;
  }
  lo -= 1;
  hi += 1;
  const auto poly = S.char_poly();
  if (positive) *positive = count_roots_leq(poly, Rat(0)) == 0;
  return smallest_root(poly, lo, hi, width);
}

}  // namespace femwave
