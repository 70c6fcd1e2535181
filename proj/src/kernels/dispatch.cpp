#include <atomic>
#include <cstdlib>
#include <string>

#include "edgereuse/core.hpp"
#include "edgereuse/kernels.hpp"

namespace edgereuse::simd {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(EDGEREUSE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(EDGEREUSE_HAVE_NEON)
      return true;  // mandatory on aarch64
#else
      return false;
#endif
  }
  return false;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&kernels_for(detected_isa())};
  return slot;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

bool is_supported(Isa isa) { return cpu_has(isa); }

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (cpu_has(isa)) out.push_back(isa);
  }
  return out;
}

Isa detected_isa() {
  if (const char* env = std::getenv("EDGEREUSE_ISA")) {
    const std::string want(env);
    for (Isa isa : supported_isas()) {
      if (to_string(isa) == want) return isa;
    }
  }
  if (cpu_has(Isa::Avx2)) return Isa::Avx2;
  if (cpu_has(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const KernelTable& kernels_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return detail::kScalarKernels;
    case Isa::Avx2:
#if defined(EDGEREUSE_HAVE_AVX2)
      return detail::kAvx2Kernels;
#else
      break;
#endif
    case Isa::Neon:
#if defined(EDGEREUSE_HAVE_NEON)
      return detail::kNeonKernels;
#else
      break;
#endif
  }
  throw Error(Errc::InvalidArgument, "kernels not built for isa " + std::string(to_string(isa)));
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() { return active().isa; }

void set_active_isa(Isa isa) {
  if (!cpu_has(isa)) {
    throw Error(Errc::InvalidArgument, "isa not supported on this cpu: " + std::string(to_string(isa)));
  }
  active_slot().store(&kernels_for(isa), std::memory_order_release);
}

}  // namespace edgereuse::simd
