#pragma once

// Data-parallel inner loops used by the likelihood, IPF and moment code.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is picked once at startup from CPUID and
// can be overridden with ASSOC_KERNELS=scalar|avx2 or set_backend(). The two
// are equivalence-tested; they differ only in summation order and in the
// exp() approximation (both within a few ulp).

#include <cstddef>
#include <span>

namespace assoc::kernels {

enum class Backend { scalar, avx2 };

struct Table {
  Backend backend;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);
  // out[i] = exp(x[i] - shift); returns sum of out. x may alias out.
  double (*exp_shift)(const double* x, double shift, double* out, std::size_t n);
  void (*scale)(double a, double* x, std::size_t n);
  // Full (both triangles) rank-one update of a column-major n x n block:
  // A[i + j*ld] += alpha * x[i] * x[j].
  void (*syr)(double alpha, const double* x, double* a, std::size_t n, std::size_t ld);
};

const Table& scalar_table();
// nullptr when the AVX2 variant was not compiled in.
const Table* avx2_table();
bool cpu_supports_avx2();

const Table& active();
Backend backend();
// Throws ArgumentError when the requested backend is unavailable.
void set_backend(Backend b);
const char* backend_name(Backend b);

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double max(std::span<const double> x) { return active().max(x.data(), x.size()); }
inline void scale(double a, std::span<double> x) { active().scale(a, x.data(), x.size()); }

// log(sum(exp(x))) with max shift. Empty input gives -inf.
double log_sum_exp(std::span<const double> x);

// p = softmax(eta); returns log_sum_exp(eta). p may alias eta.
double softmax(std::span<const double> eta, std::span<double> p);

// RAII override of the active backend, for tests and benchmarks.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : saved_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(saved_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend saved_;
};

}  // namespace assoc::kernels
