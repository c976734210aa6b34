#pragma once

// Dense row-major matrices of doubles and the handful of kernels the
// hashing pipeline needs. Everything here is value-semantic and
// deterministic: identical inputs give bit-identical outputs.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tdh {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  // Columns picked by index, in the given order.
  Matrix select_cols(std::span<const std::size_t> indices) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_of(const Matrix& m);

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double frobenius_sq(const Matrix& m);
double max_abs(const Matrix& m);
// Per-row sums, i.e. m * 1.
std::vector<double> row_sums(const Matrix& m);
bool all_finite(const Matrix& m);

// Cholesky factor of a symmetric positive-definite matrix. Factor once,
// solve against many right-hand sides.
class Cholesky {
 public:
  // Throws NotPositiveDefinite naming the first non-positive pivot, or
  // InvalidArgument if `a` is not square and symmetric within 1e-10.
  explicit Cholesky(const Matrix& a);

  std::size_t dim() const noexcept { return lower_.rows(); }
  // X with a * X == b.
  Matrix solve(const Matrix& b) const;

 private:
  Matrix lower_;
};

Matrix solve_spd(const Matrix& a, const Matrix& b);

// i.i.d. N(0, stddev^2) entries from a 64-bit Mersenne Twister seeded with `seed`.
Matrix seeded_normal(std::size_t rows, std::size_t cols, std::uint64_t seed, double stddev);

}  // namespace tdh
