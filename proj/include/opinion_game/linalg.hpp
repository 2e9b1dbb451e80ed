#pragma once

// Dense kernels with no game semantics: LU solves with a condition estimate,
// the matrix exponential, the exponential together with its running integral,
// and a symmetric eigensolver for the spectral path.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "opinion_game/dense_matrix.hpp"
#include "opinion_game/errors.hpp"

namespace opinion_game {

struct LinalgTolerances {
  /// Reciprocal condition estimate below which a system is reported singular.
  double singular_rcond = 1e-12;
};

/// LU factorization with partial pivoting, P*A = L*U.
class LuDecomposition {
 public:
  explicit LuDecomposition(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.square()) throw std::invalid_argument("LU: matrix must be square");
    if (!lu_.all_finite()) throw std::invalid_argument("LU: non-finite entries");
    norm1_ = norm1(lu_);
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t r = k + 1; r < n; ++r) {
        if (std::abs(lu_(r, k)) > best) {
          best = std::abs(lu_(r, k));
          p = r;
        }
      }
      if (best == 0.0) {
        exactly_singular_ = true;
        continue;
      }
      if (p != k) {
        for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(p, c));
        std::swap(perm_[k], perm_[p]);
      }
      const double pivot = lu_(k, k);
      for (std::size_t r = k + 1; r < n; ++r) {
        const double f = lu_(r, k) / pivot;
        lu_(r, k) = f;
        if (f == 0.0) continue;
        auto dst = lu_.row(r);
        auto src = lu_.row(k);
        for (std::size_t c = k + 1; c < n; ++c) dst[c] -= f * src[c];
      }
    }
  }

  std::size_t size() const { return lu_.rows(); }
  bool exactly_singular() const { return exactly_singular_; }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = size();
    if (b.size() != n) throw std::invalid_argument("LU solve: dimension mismatch");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= lu_(ii, j) * x[j];
      x[ii] /= lu_(ii, ii);
    }
    return x;
  }

  Matrix solve(const Matrix& b) const {
    if (b.rows() != size()) throw std::invalid_argument("LU solve: dimension mismatch");
    Matrix x(b.rows(), b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      const Vector col = solve(b.column(c));
      for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = col[r];
    }
    return x;
  }

  /// Solves A^T x = b.
  Vector solve_transpose(std::span<const double> b) const {
    const std::size_t n = size();
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) y[i] -= lu_(j, i) * y[j];
      y[i] /= lu_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;)
      for (std::size_t j = ii + 1; j < n; ++j) y[ii] -= lu_(j, ii) * y[j];
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = y[i];
    return x;
  }

  /// Reciprocal 1-norm condition number, with ||A^-1||_1 from Hager's estimator.
  double rcond() const {
    const std::size_t n = size();
    if (n == 0) return 1.0;
    if (exactly_singular_) return 0.0;
    if (norm1_ == 0.0) return 0.0;
    Vector x(n, 1.0 / static_cast<double>(n));
    double estimate = 0.0;
    std::size_t last_j = n;
    for (int iter = 0; iter < 5; ++iter) {
      const Vector y = solve(x);
      estimate = 0.0;
      for (double v : y) estimate += std::abs(v);
      Vector xi(n);
      for (std::size_t i = 0; i < n; ++i) xi[i] = y[i] >= 0.0 ? 1.0 : -1.0;
      const Vector z = solve_transpose(xi);
      std::size_t j = 0;
      double zmax = 0.0, ztx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ztx += z[i] * x[i];
        if (std::abs(z[i]) > zmax) {
          zmax = std::abs(z[i]);
          j = i;
        }
      }
      if (zmax <= ztx || j == last_j) break;
      std::fill(x.begin(), x.end(), 0.0);
      x[j] = 1.0;
      last_j = j;
    }
    // Alternating test vector guards against the estimator's known blind spots.
    Vector alt(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      alt[i] = sign * (1.0 + static_cast<double>(i) / static_cast<double>(n > 1 ? n - 1 : 1));
    }
    const Vector ya = solve(alt);
    double alt_est = 0.0;
    for (double v : ya) alt_est += std::abs(v);
    alt_est *= 2.0 / (3.0 * static_cast<double>(n));
    estimate = std::max(estimate, alt_est);
    if (!std::isfinite(estimate) || estimate == 0.0) return 0.0;
    return 1.0 / (norm1_ * estimate);
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double norm1_ = 0.0;
  bool exactly_singular_ = false;
};

namespace detail {

inline LuDecomposition checked_lu(const Matrix& m, const LinalgTolerances& tol) {
  if (!m.square()) throw std::invalid_argument("solve_linear: matrix must be square");
  LuDecomposition lu(m);
  const double rc = lu.rcond();
  if (!(rc >= tol.singular_rcond)) {
    throw SingularMatrixError("solve_linear: matrix is singular to working tolerance", rc);
  }
  return lu;
}

}  // namespace detail

/// Solves M X = B. Throws SingularMatrixError when the reciprocal condition
/// estimate falls below the configured threshold.
inline Matrix solve_linear(const Matrix& m, const Matrix& b, const LinalgTolerances& tol = {}) {
  if (b.rows() != m.rows()) throw std::invalid_argument("solve_linear: dimension mismatch");
  if (!b.all_finite()) throw std::invalid_argument("solve_linear: non-finite right-hand side");
  return detail::checked_lu(m, tol).solve(b);
}

inline Vector solve_linear(const Matrix& m, std::span<const double> b, const LinalgTolerances& tol = {}) {
  return detail::checked_lu(m, tol).solve(b);
}

// Scaling and squaring with diagonal Pade approximants of degree 3..13,
// selected by the 1-norm of the scaled argument.
namespace detail {

constexpr std::array<double, 5> kPadeTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                              9.504178996162932e-1, 2.097847961257068e0,
                                              5.371920351148152e0};

inline void pade_low(const Matrix& a, int degree, Matrix& u, Matrix& v) {
  static const double b3[] = {120.0, 60.0, 12.0, 1.0};
  static const double b5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  static const double b7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
  static const double b9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                              2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  const double* b = degree == 3 ? b3 : degree == 5 ? b5 : degree == 7 ? b7 : b9;
  const std::size_t n = a.rows();
  const Matrix ident = Matrix::identity(n);
  const Matrix a2 = a * a;
  // powers[j] = A^(2j)
  std::vector<Matrix> powers{ident, a2};
  for (int j = 2; 2 * j <= degree; ++j) powers.push_back(powers.back() * a2);
  Matrix odd(n, n), even(n, n);
  for (int j = 0; 2 * j <= degree; ++j) {
    odd += b[2 * j + 1] * powers[j];
    even += b[2 * j] * powers[j];
  }
  u = a * odd;
  v = std::move(even);
}

inline void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const std::size_t n = a.rows();
  const Matrix ident = Matrix::identity(n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
  u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Matrix inner_v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2);
  v = inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

}  // namespace detail

/// e^{M t}.
inline Matrix matrix_exponential(const Matrix& m, double t) {
  if (!m.square()) throw std::invalid_argument("matrix_exponential: matrix must be square");
  if (!std::isfinite(t)) throw std::invalid_argument("matrix_exponential: non-finite time");
  if (!m.all_finite()) throw std::invalid_argument("matrix_exponential: non-finite entries");
  const std::size_t n = m.rows();
  if (n == 0) return {};
  Matrix a = m * t;
  const double nrm = norm1(a);

  Matrix u, v;
  int squarings = 0;
  constexpr std::array<int, 4> low_degrees = {3, 5, 7, 9};
  bool done = false;
  for (std::size_t i = 0; i < low_degrees.size(); ++i) {
    if (nrm <= detail::kPadeTheta[i]) {
      detail::pade_low(a, low_degrees[i], u, v);
      done = true;
      break;
    }
  }
  if (!done) {
    const double ratio = nrm / detail::kPadeTheta[4];
    if (ratio > 1.0) {
      squarings = static_cast<int>(std::ceil(std::log2(ratio)));
      a *= std::ldexp(1.0, -squarings);
    }
    detail::pade13(a, u, v);
  }
  // (V - U) X = (V + U); V - U is well conditioned for these norm bounds.
  Matrix x = LuDecomposition(v - u).solve(v + u);
  for (int s = 0; s < squarings; ++s) x = x * x;
  return x;
}

struct ExpWithIntegral {
  Matrix phi;  ///< e^{Mt}
  Matrix psi;  ///< integral_0^t e^{M(t-s)} ds
};

/// e^{Mt} and its running integral, read off the top blocks of the exponential
/// of the augmented matrix [[M, I], [0, 0]] scaled by t.
inline ExpWithIntegral exp_with_integral(const Matrix& m, double t) {
  if (!m.square()) throw std::invalid_argument("exp_with_integral: matrix must be square");
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("exp_with_integral: t must be finite and >= 0");
  const std::size_t n = m.rows();
  Matrix aug(2 * n, 2 * n);
  aug.set_block(0, 0, m);
  aug.set_block(0, n, Matrix::identity(n));
  const Matrix e = matrix_exponential(aug, t);
  return {e.block(0, 0, n, n), e.block(0, n, n, n)};
}

struct SymmetricEigen {
  Vector values;
  Matrix vectors;  ///< orthonormal columns
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
inline SymmetricEigen symmetric_eigen(const Matrix& s, double symmetry_tol = 1e-12) {
  if (!s.square()) throw std::invalid_argument("symmetric_eigen: matrix must be square");
  const std::size_t n = s.rows();
  const double scale = std::max(1.0, max_abs(s));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(s(i, j) - s(j, i)) > symmetry_tol * scale)
        throw std::invalid_argument("symmetric_eigen: matrix is not symmetric");

  Matrix a = s;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= 1e-30 * scale * scale) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  SymmetricEigen out{Vector(n), std::move(v)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
  return out;
}

}  // namespace opinion_game
