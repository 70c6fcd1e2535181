#include <doctest.h>

#include <cstdlib>

#include "edgereuse/kernels.hpp"
#include "edgereuse/rng.hpp"
#include "oracles.hpp"

using namespace edgereuse;

namespace {

// Restores the active ISA after a test pins one.
struct IsaGuard {
  simd::Isa saved = simd::active_isa();
  ~IsaGuard() { simd::set_active_isa(saved); }
};

}  // namespace

TEST_CASE("scalar kernels against the long-double oracle") {
  const auto& k = simd::kernels_for(simd::Isa::Scalar);
  Rng rng(21);
  for (std::size_t n : {1u, 2u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 63u, 64u, 65u, 200u}) {
    const auto a = oracle::random_vector(rng, n);
    const auto b = oracle::random_vector(rng, n);
    CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(static_cast<double>(oracle::dot(a, b))).epsilon(1e-12));
  }
}

TEST_CASE("every supported ISA agrees with scalar") {
  const auto& ref = simd::kernels_for(simd::Isa::Scalar);
  Rng rng(22);
  for (simd::Isa isa : simd::supported_isas()) {
    CAPTURE(simd::to_string(isa));
    const auto& k = simd::kernels_for(isa);
    CHECK(k.isa == isa);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t rows = 1 + rng.below(32);
      const std::size_t cols = 1 + rng.below(140);
      const auto m = oracle::random_vector(rng, rows * cols);
      const auto x = oracle::random_vector(rng, cols);

      const double d_ref = ref.dot(m.data(), x.data(), cols);
      const double d = k.dot(m.data(), x.data(), cols);
      CHECK(d == doctest::Approx(d_ref).epsilon(1e-12));

      std::vector<double> out_ref(rows), out(rows);
      ref.matvec(m.data(), rows, cols, x.data(), out_ref.data());
      k.matvec(m.data(), rows, cols, x.data(), out.data());
      for (std::size_t r = 0; r < rows; ++r) CHECK(out[r] == doctest::Approx(out_ref[r]).epsilon(1e-12));

      // Sign bits may differ only where the projection is within rounding of zero.
      const std::uint32_t bits = k.sign_bits(m.data(), rows, cols, x.data());
      const std::uint32_t bits_oracle = oracle::sign_bits(m.data(), rows, cols, x);
      for (std::size_t r = 0; r < rows; ++r) {
        if (std::abs(out_ref[r]) > 1e-9) CHECK(((bits >> r) & 1u) == ((bits_oracle >> r) & 1u));
      }
    }
  }
}

TEST_CASE("sign bits treat an exact zero projection as 0") {
  const std::vector<double> planes{1, 0, 0, 1, -1, 0};
  const std::vector<double> x{0, 2};
  for (simd::Isa isa : simd::supported_isas()) {
    CHECK(simd::kernels_for(isa).sign_bits(planes.data(), 3, 2, x.data()) == 0b010u);
  }
}

TEST_CASE("active ISA can be pinned and rejects unsupported choices") {
  IsaGuard guard;
  simd::set_active_isa(simd::Isa::Scalar);
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  CHECK(simd::active().isa == simd::Isa::Scalar);
  for (simd::Isa isa : {simd::Isa::Avx2, simd::Isa::Neon}) {
    if (!simd::is_supported(isa)) CHECK_THROWS(simd::set_active_isa(isa));
  }
  CHECK(simd::is_supported(simd::Isa::Scalar));
}
