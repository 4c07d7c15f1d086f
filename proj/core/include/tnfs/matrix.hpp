#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tnfs {

using Vector = std::vector<double>;

// Dense row-major matrix with explicit shape. No broadcasting: every
// arithmetic helper checks shapes and throws InvalidArgument on mismatch.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// y = M x
Vector multiply(const Matrix& m, std::span<const double> x);
// y += M x
void multiply_add(const Matrix& m, std::span<const double> x, std::span<double> y);
// y += M^T x
void multiply_transpose_add(const Matrix& m, std::span<const double> x, std::span<double> y);
// M += scale * a b^T
void add_outer(Matrix& m, double scale, std::span<const double> a, std::span<const double> b);
// dst += scale * src
void add_scaled(Matrix& dst, double scale, const Matrix& src);

bool all_finite(std::span<const double> v) noexcept;
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace tnfs
