#include <arm_neon.h>

#include "edgereuse/kernels.hpp"

namespace edgereuse::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) noexcept {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void matvec_neon(const double* m, std::size_t rows, std::size_t cols, const double* x,
                 double* out) noexcept {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot_neon(m + r * cols, x, cols);
}

std::uint32_t sign_bits_neon(const double* planes, std::size_t rows, std::size_t cols,
                             const double* x) noexcept {
  std::uint32_t bits = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (dot_neon(planes + r * cols, x, cols) > 0.0) bits |= (std::uint32_t{1} << r);
  }
  return bits;
}

}  // namespace

namespace detail {
const KernelTable kNeonKernels{Isa::Neon, dot_neon, matvec_neon, sign_bits_neon};
}

}  // namespace edgereuse::simd
