#include <atomic>
#include <cstdlib>
#include <cstring>

#include "sfm/errors.hpp"
#include "sfm/kernels.hpp"

namespace sfm::kernels {

namespace {

Isa detect() {
  const char* env = std::getenv("SFM_ISA");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
  return avx2_supported() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_supported() {
#if SFM_HAVE_AVX2_KERNELS
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_supported())
    throw ArgumentError("AVX2 kernels requested on a CPU without AVX2/FMA");
  current().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

#if SFM_HAVE_AVX2_KERNELS
#define SFM_DISPATCH(fn, ...) \
  (active_isa() == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define SFM_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double dot(const double* a, const double* b, std::size_t n) { return SFM_DISPATCH(dot, a, b, n); }

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
  return SFM_DISPATCH(sum_sq_diff, a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  SFM_DISPATCH(axpy, alpha, x, y, n);
}

void rank1_update(double* c, std::size_t ld, const double* v, double alpha, std::size_t n) {
  SFM_DISPATCH(rank1_update, c, ld, v, alpha, n);
}

}  // namespace sfm::kernels
