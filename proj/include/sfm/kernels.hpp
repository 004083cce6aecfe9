#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2/FMA variant. The variant is chosen once at startup from CPUID; setting
// SFM_ISA=scalar in the environment (or calling force_isa) pins the reference.

#include <cstddef>

namespace sfm::kernels {

enum class Isa { Scalar, Avx2 };

bool avx2_supported();
Isa active_isa();
/// Override dispatch (tests only). Forcing Avx2 on a CPU without it throws.
void force_isa(Isa isa);
const char* isa_name(Isa isa);

double dot(const double* a, const double* b, std::size_t n);
/// sum_i (a_i - b_i)^2
double sum_sq_diff(const double* a, const double* b, std::size_t n);
/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
/// C += alpha * v v^T for a column-major n x n block with leading dimension ld.
void rank1_update(double* c, std::size_t ld, const double* v, double alpha, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq_diff(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void rank1_update(double* c, std::size_t ld, const double* v, double alpha, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define SFM_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq_diff(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void rank1_update(double* c, std::size_t ld, const double* v, double alpha, std::size_t n);
}  // namespace avx2
#else
#define SFM_HAVE_AVX2_KERNELS 0
#endif

}  // namespace sfm::kernels
