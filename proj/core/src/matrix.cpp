#include "tnfs/matrix.hpp"

#include <cmath>
#include <string>

#include "tnfs/errors.hpp"

namespace tnfs {

namespace {

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw InvalidArgument("matrix " + shape(rows, cols) + " given " +
                          std::to_string(values_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const noexcept { return tnfs::all_finite(values_); }

Vector multiply(const Matrix& m, std::span<const double> x) {
  Vector y(m.rows(), 0.0);
  multiply_add(m, x, y);
  return y;
}

void multiply_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  if (x.size() != m.cols() || y.size() != m.rows()) {
    throw InvalidArgument("multiply: matrix " + shape(m.rows(), m.cols()) + " vs x[" +
                          std::to_string(x.size()) + "], y[" + std::to_string(y.size()) + "]");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
    y[r] += acc;
  }
}

void multiply_transpose_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  if (x.size() != m.rows() || y.size() != m.cols()) {
    throw InvalidArgument("multiply_transpose: matrix " + shape(m.rows(), m.cols()) +
                          " vs x[" + std::to_string(x.size()) + "], y[" +
                          std::to_string(y.size()) + "]");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += m(r, c) * xr;
  }
}

void add_outer(Matrix& m, double scale, std::span<const double> a, std::span<const double> b) {
  if (a.size() != m.rows() || b.size() != m.cols()) {
    throw InvalidArgument("add_outer: matrix " + shape(m.rows(), m.cols()) + " vs " +
                          shape(a.size(), b.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += ar * b[c];
  }
}

void add_scaled(Matrix& dst, double scale, const Matrix& src) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols()) {
    throw InvalidArgument("add_scaled: " + shape(dst.rows(), dst.cols()) + " vs " +
                          shape(src.rows(), src.cols()));
  }
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

bool all_finite(std::span<const double> v) noexcept {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dot: length " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace tnfs
