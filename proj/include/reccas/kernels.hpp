#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace reccas::kernels {

// Dispatch table for the data-parallel inner loops (dot products against
// embedding tables, gradient accumulation, ADAM sweeps). The scalar table is
// the reference implementation; the AVX2 table must agree with it up to
// floating-point reassociation (see test_kernels.cpp).
struct Ops {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out = a .* b
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // y += a .* b
  void (*fma_acc)(const double* a, const double* b, double* y, std::size_t n);
  // In-place ADAM: m,v moment buffers, p parameters, g gradient.
  // bc1/bc2 are the bias-correction factors 1-beta^t.
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2);
  const char* name;
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when the build/CPU lacks AVX2

// Table picked once at startup: AVX2 when the CPU supports it, overridable
// with RECCAS_KERNELS=scalar|avx2.
const Ops& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> x) {
  return active().sum(x.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

// Shifted log-sum-exp over a raw array. Scalar on purpose: it is not an
// inner-loop kernel and exactness matters more than width.
double logsumexp(const double* x, std::size_t n);
inline double logsumexp(std::span<const double> x) {
  return logsumexp(x.data(), x.size());
}

}  // namespace reccas::kernels
