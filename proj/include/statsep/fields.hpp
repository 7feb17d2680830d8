#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "statsep/error.hpp"

namespace statsep {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape s);

// Row-major periodic 2-D grid. Element (r, c) is stored at r * width + c and
// at(r, c) wraps both indices, so the grid behaves as a torus.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : shape_{height, width}, values_(checked_size(height, width), fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> values)
      : shape_{height, width}, values_(std::move(values)) {
    if (values_.size() != checked_size(height, width)) {
      throw Error(ErrorKind::ShapeMismatch, "grid value count does not match height x width");
    }
  }
  explicit Grid(Shape s, T fill = T{}) : Grid(s.height, s.width, fill) {}

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  Shape shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  const std::vector<T>& storage() const { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  T& at(std::ptrdiff_t row, std::ptrdiff_t col) { return values_[wrap_index(row, col)]; }
  const T& at(std::ptrdiff_t row, std::ptrdiff_t col) const { return values_[wrap_index(row, col)]; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  Grid& operator+=(const Grid& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Grid& operator-=(const Grid& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Grid& operator*=(T s) {
    for (auto& v : values_) v *= s;
    return *this;
  }

  friend Grid operator+(Grid a, const Grid& b) { return a += b; }
  friend Grid operator-(Grid a, const Grid& b) { return a -= b; }
  friend Grid operator*(Grid a, T s) { return a *= s; }
  friend Grid operator*(T s, Grid a) { return a *= s; }

  bool operator==(const Grid&) const = default;

  void require_same_shape(const Grid& o) const {
    if (!(o.shape_ == shape_)) {
      throw Error(ErrorKind::ShapeMismatch,
                  "shape mismatch: " + to_string(shape_) + " vs " + to_string(o.shape_));
    }
  }

 private:
  static std::size_t checked_size(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0) throw Error(ErrorKind::InvalidGeometry, "grid dimensions must be >= 1");
    return h * w;
  }
  std::size_t wrap_index(std::ptrdiff_t row, std::ptrdiff_t col) const {
    const auto h = static_cast<std::ptrdiff_t>(shape_.height);
    const auto w = static_cast<std::ptrdiff_t>(shape_.width);
    row %= h;
    col %= w;
    if (row < 0) row += h;
    if (col < 0) col += w;
    return static_cast<std::size_t>(row * w + col);
  }

  Shape shape_{};
  std::vector<T> values_;
};

using Field2D = Grid<double>;
using ComplexField2D = Grid<cplx>;

// Fourier-domain grid. Index (r, c) holds wavevector (r, c) taken modulo the
// shape; used both for unitary transforms of fields and for filter multipliers.
class Spectrum2D : public Grid<cplx> {
 public:
  using Grid<cplx>::Grid;
  Spectrum2D() = default;
  explicit Spectrum2D(Grid<cplx> g) : Grid<cplx>(std::move(g)) {}
};

// Signed integer frequency of index i on an axis of length n, in
// [-(n-1)/2, n/2]. The Nyquist index maps to +n/2.
inline long signed_frequency(std::size_t i, std::size_t n) {
  const long li = static_cast<long>(i);
  const long ln = static_cast<long>(n);
  return (2 * li > ln) ? li - ln : li;
}

ComplexField2D to_complex(const Field2D& f);
Field2D real_part(const ComplexField2D& f);
Field2D imag_part(const ComplexField2D& f);

double mean(const Field2D& f);
double variance(const Field2D& f);  // population variance
double norm2(const Field2D& f);     // sum of squares
double norm2(const ComplexField2D& f);
double max_abs(const Field2D& f);
double dot(const Field2D& a, const Field2D& b);

// Circular shift: out(r, c) = f(r - dr, c - dc).
template <typename T>
Grid<T> circular_shift(const Grid<T>& f, std::ptrdiff_t dr, std::ptrdiff_t dc) {
  Grid<T> out(f.shape());
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      out[r * f.width() + c] = f.at(static_cast<std::ptrdiff_t>(r) - dr, static_cast<std::ptrdiff_t>(c) - dc);
    }
  }
  return out;
}

}  // namespace statsep
