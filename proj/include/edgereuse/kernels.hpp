#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference; SIMD
// variants (AVX2+FMA on x86-64, NEON on aarch64) are selected once at
// startup from CPU features and can be pinned with EDGEREUSE_ISA=scalar|avx2|neon.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace edgereuse::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n) noexcept;
  // out[r] = dot(m[r*cols .. r*cols+cols), x) for r in [0, rows)
  void (*matvec)(const double* m, std::size_t rows, std::size_t cols, const double* x,
                 double* out) noexcept;
  // bit r set iff dot(planes row r, x) > 0; rows <= 32
  std::uint32_t (*sign_bits)(const double* planes, std::size_t rows, std::size_t cols,
                             const double* x) noexcept;
};

/// ISAs this binary was built with and the running CPU supports.
std::vector<Isa> supported_isas();
bool is_supported(Isa isa);

/// Best ISA for this CPU, honouring EDGEREUSE_ISA when set.
Isa detected_isa();

const KernelTable& kernels_for(Isa isa);
const KernelTable& active();
Isa active_isa();

/// Pins the active kernel table. Throws if the ISA is unsupported here.
void set_active_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return active().dot(a.data(), b.data(), a.size());
}

inline void matvec(std::span<const double> m, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> out) noexcept {
  active().matvec(m.data(), rows, cols, x.data(), out.data());
}

inline std::uint32_t sign_bits(std::span<const double> planes, std::size_t rows,
                               std::size_t cols, std::span<const double> x) noexcept {
  return active().sign_bits(planes.data(), rows, cols, x.data());
}

namespace detail {
extern const KernelTable kScalarKernels;
#if defined(EDGEREUSE_HAVE_AVX2)
extern const KernelTable kAvx2Kernels;
#endif
#if defined(EDGEREUSE_HAVE_NEON)
extern const KernelTable kNeonKernels;
#endif
}  // namespace detail

}  // namespace edgereuse::simd
