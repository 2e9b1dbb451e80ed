#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace opinion_game {

using Vector = std::vector<double>;

/// Row-major dense real matrix. Sized for desk-scale problems (a few hundred
/// rows at most), so every operation is a plain loop.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ == 0 ? 0 : init.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  /// Copy of the rows x cols block starting at (r0, c0).
  Matrix block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const {
    if (r0 + rows > rows_ || c0 + cols > cols_) throw std::out_of_range("Matrix::block");
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out(r, c) = (*this)(r0 + r, c0 + c);
    return out;
  }

  void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw std::out_of_range("Matrix::set_block");
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) (*this)(r0 + r, c0 + c) = b(r, c);
  }

  Matrix transpose() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix& operator+=(const Matrix& o) {
    check_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend Matrix operator-(Matrix a) { return a *= -1.0; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("Matrix product: inner dimensions differ");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      double* orow = out.data_.data() + i * out.cols_;
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const double* brow = b.data_.data() + k * b.cols_;
        for (std::size_t j = 0; j < b.cols_; ++j) orow[j] += aik * brow[j];
      }
    }
    return out;
  }

  friend Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols_ != x.size()) throw std::invalid_argument("Matrix-vector product: dimension mismatch");
    Vector out(a.rows_, 0.0);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols_; ++k) s += a(i, k) * x[k];
      out[i] = s;
    }
    return out;
  }
  friend Vector operator*(const Matrix& a, const Vector& x) { return a * std::span<const double>(x); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void check_same(const Matrix& o, const char* what) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw std::invalid_argument(std::string("Matrix ") + what + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Maximum absolute column sum.
inline double norm1(const Matrix& m) {
  double best = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) s += std::abs(m(r, c));
    best = std::max(best, s);
  }
  return best;
}

/// Maximum absolute row sum.
inline double norm_inf(const Matrix& m) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

inline double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::abs(v));
  return best;
}

inline double max_abs(std::span<const double> v) {
  double best = 0.0;
  for (double x : v) best = std::max(best, std::abs(x));
  return best;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return max_abs(a - b); }

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: size mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

inline Vector operator+(Vector a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("vector +: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vector operator-(Vector a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("vector -: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

inline Vector scaled(Vector a, double s) {
  for (auto& v : a) v *= s;
  return a;
}

}  // namespace opinion_game
