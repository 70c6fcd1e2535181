#include "edgereuse/kernels.hpp"

namespace edgereuse::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void matvec_scalar(const double* m, std::size_t rows, std::size_t cols, const double* x,
                   double* out) noexcept {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot_scalar(m + r * cols, x, cols);
}

std::uint32_t sign_bits_scalar(const double* planes, std::size_t rows, std::size_t cols,
                               const double* x) noexcept {
  std::uint32_t bits = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (dot_scalar(planes + r * cols, x, cols) > 0.0) bits |= (std::uint32_t{1} << r);
  }
  return bits;
}

}  // namespace

namespace detail {
const KernelTable kScalarKernels{Isa::Scalar, dot_scalar, matvec_scalar, sign_bits_scalar};
}

}  // namespace edgereuse::simd
