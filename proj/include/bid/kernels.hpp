#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind the tensor ops, the code search and the
// optimizer. The scalar table is the reference; the AVX2 table must agree
// with it up to floating-point reassociation (see tests/kernels_test.cpp).
// The active table is chosen once at startup from CPUID, overridable with
// BID_KERNELS=scalar|avx2.
namespace bid::kernels {

struct Table {
  const char* name;

  // y[i] += a * x[i]
  void (*axpy_f32)(float a, const float* x, float* y, std::size_t n);
  void (*axpy_f64)(double a, const double* x, double* y, std::size_t n);

  float (*dot_f32)(const float* x, const float* y, std::size_t n);
  double (*dot_f64)(const double* x, const double* y, std::size_t n);

  // sum_i (x[i] - y[i])^2
  float (*l2sq_f32)(const float* x, const float* y, std::size_t n);
  double (*l2sq_f64)(const double* x, const double* y, std::size_t n);

  // y[i] = max(x[i], 0)
  void (*relu_f32)(const float* x, float* y, std::size_t n);
  void (*relu_f64)(const double* x, double* y, std::size_t n);

  // gx[i] += x[i] > 0 ? gy[i] : 0
  void (*relu_bwd_f32)(const float* x, const float* gy, float* gx, std::size_t n);
  void (*relu_bwd_f64)(const double* x, const double* gy, double* gx, std::size_t n);

  // fused Adam element update with precomputed bias corrections
  //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
  //   w -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
  void (*adam_f32)(float* w, float* m, float* v, const float* g, std::size_t n,
                   float lr, float b1, float b2, float eps, float bc1, float bc2);
  void (*adam_f64)(double* w, double* m, double* v, const double* g, std::size_t n,
                   double lr, double b1, double b2, double eps, double bc1, double bc2);
};

const Table& scalar_table();
bool avx2_supported();
// Valid only when avx2_supported(); entries are null otherwise.
const Table& avx2_table();
const Table& active();
std::string active_name();

// Typed wrappers over the active table.
inline void axpy(float a, const float* x, float* y, std::size_t n) { active().axpy_f32(a, x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy_f64(a, x, y, n); }
inline float dot(const float* x, const float* y, std::size_t n) { return active().dot_f32(x, y, n); }
inline double dot(const double* x, const double* y, std::size_t n) { return active().dot_f64(x, y, n); }
inline float l2sq(const float* x, const float* y, std::size_t n) { return active().l2sq_f32(x, y, n); }
inline double l2sq(const double* x, const double* y, std::size_t n) { return active().l2sq_f64(x, y, n); }
inline void relu(const float* x, float* y, std::size_t n) { active().relu_f32(x, y, n); }
inline void relu(const double* x, double* y, std::size_t n) { active().relu_f64(x, y, n); }
inline void relu_bwd(const float* x, const float* gy, float* gx, std::size_t n) {
  active().relu_bwd_f32(x, gy, gx, n);
}
inline void relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
  active().relu_bwd_f64(x, gy, gx, n);
}
inline void adam(float* w, float* m, float* v, const float* g, std::size_t n,
                 float lr, float b1, float b2, float eps, float bc1, float bc2) {
  active().adam_f32(w, m, v, g, n, lr, b1, b2, eps, bc1, bc2);
}
inline void adam(double* w, double* m, double* v, const double* g, std::size_t n,
                 double lr, double b1, double b2, double eps, double bc1, double bc2) {
  active().adam_f64(w, m, v, g, n, lr, b1, b2, eps, bc1, bc2);
}

}  // namespace bid::kernels
