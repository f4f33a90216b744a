#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels_impl.hpp"

namespace assoc::kernels::detail {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double max(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double exp_shift(const double* x, double shift, double* out, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - shift);
    s += out[i];
  }
  return s;
}

void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void syr(double alpha, const double* x, double* a, std::size_t n, std::size_t ld) {
  for (std::size_t j = 0; j < n; ++j) {
    const double c = alpha * x[j];
    double* col = a + j * ld;
    for (std::size_t i = 0; i < n; ++i) col[i] += c * x[i];
  }
}

}  // namespace

const Table kScalarTable{Backend::scalar, dot, axpy, sum, max, exp_shift, scale, syr};

}  // namespace assoc::kernels::detail
