#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"

namespace aucmax {

//! Dense row-major float64 matrix. Rows are samples wherever a matrix holds a
//! batch.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool empty() const noexcept { return data.empty(); }

  friend bool operator==(const Matrix &, const Matrix &) = default;
};

//! Gathers the given rows into a new matrix.
inline Matrix take_rows(const Matrix &m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m.rows)
      throw ShapeError("take_rows: row index " + std::to_string(idx[i]) +
                       " out of range " + std::to_string(m.rows));
    auto src = m.row(idx[i]);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

template <typename T>
std::vector<T> take(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx)
    out.push_back(v[i]);
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

} // namespace aucmax
