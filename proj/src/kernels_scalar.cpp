#include "bid/kernels.hpp"

#include <cmath>

// Reference kernels. Plain sequential loops; summation order is the
// contract the SIMD variants are tested against.
namespace bid::kernels {
namespace {

template <class T>
void axpy_impl(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
T dot_impl(const T* x, const T* y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
T l2sq_impl(const T* x, const T* y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

template <class T>
void relu_impl(const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_bwd_impl(const T* x, const T* gy, T* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gx[i] += gy[i];
}

template <class T>
void adam_impl(T* w, T* m, T* v, const T* g, std::size_t n, T lr, T b1, T b2,
               T eps, T bc1, T bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t = {
      "scalar",
      &axpy_impl<float>,
      &axpy_impl<double>,
      &dot_impl<float>,
      &dot_impl<double>,
      &l2sq_impl<float>,
      &l2sq_impl<double>,
      &relu_impl<float>,
      &relu_impl<double>,
      &relu_bwd_impl<float>,
      &relu_bwd_impl<double>,
      &adam_impl<float>,
      &adam_impl<double>,
  };
  return t;
}

}  // namespace bid::kernels
