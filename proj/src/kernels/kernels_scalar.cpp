#include "sfm/kernels.hpp"

namespace sfm::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rank1_update(double* c, std::size_t ld, const double* v, double alpha, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) axpy(alpha * v[j], v, c + j * ld, n);
}

}  // namespace sfm::kernels::scalar
