#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace bid {

// Dense row-major matrix. Sequence tensors are stored channels x time so a
// row is one channel over contiguous time steps.
template <class T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {}
  Mat(int r, int c, T fill) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  T* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const T* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }

  T& at(int r, int c) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return v[static_cast<std::size_t>(r) * cols + c];
  }
  T at(int r, int c) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    return v[static_cast<std::size_t>(r) * cols + c];
  }

  void zero() { std::fill(v.begin(), v.end(), T(0)); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  Mat transposed() const {
    Mat t(cols, rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
    return t;
  }

  template <class U>
  Mat<U> cast() const {
    Mat<U> o(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) o.v[i] = static_cast<U>(v[i]);
    return o;
  }
};

template <class T>
bool operator==(const Mat<T>& a, const Mat<T>& b) {
  return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
}

}  // namespace bid
