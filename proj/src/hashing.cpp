#include "edgereuse/hashing.hpp"

#include <algorithm>
#include <cmath>

#include "edgereuse/kernels.hpp"
#include "edgereuse/rng.hpp"

namespace edgereuse {

LshFamily::LshFamily(std::uint64_t seed, std::size_t dim, int bits, int tables)
    : seed_(seed), dim_(dim), bits_(bits), tables_(tables) {
  if (dim == 0) throw Error(Errc::InvalidArgument, "lsh family needs dim >= 1");
  if (bits < 1 || bits > 32) throw Error(Errc::InvalidArgument, "lsh bits must be in [1,32]");
  if (tables < 1) throw Error(Errc::InvalidArgument, "lsh family needs at least one table");

  planes_.resize(static_cast<std::size_t>(tables) * bits * dim);
  Rng rng(derive_seed(seed, 0x4c5348 /* "LSH" */));
  for (std::size_t row = 0; row < planes_.size() / dim; ++row) {
    double* p = planes_.data() + row * dim;
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        p[j] = rng.normal();
        norm2 += p[j] * p[j];
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < dim; ++j) p[j] *= inv;
  }
}

std::span<const double> LshFamily::hyperplanes(int table) const {
  if (table < 0 || table >= tables_) throw Error(Errc::InvalidArgument, "lsh table index out of range");
  const std::size_t block = static_cast<std::size_t>(bits_) * dim_;
  return {planes_.data() + table * block, block};
}

void LshFamily::check_input(const FeatureVector& v) const {
  if (v.dim() != dim_) {
    throw Error(Errc::DimensionMismatch,
                "lsh input has dim " + std::to_string(v.dim()) + ", family expects " + std::to_string(dim_));
  }
  require_nonzero(v);
}

LshSignature LshFamily::signature(const FeatureVector& v, int table) const {
  check_input(v);
  const auto planes = hyperplanes(table);
  return {simd::sign_bits(planes, static_cast<std::size_t>(bits_), dim_, v.values()), table};
}

std::vector<LshSignature> LshFamily::signatures(const FeatureVector& v) const {
  check_input(v);
  std::vector<LshSignature> out;
  out.reserve(tables_);
  for (int t = 0; t < tables_; ++t) {
    out.push_back({simd::sign_bits(hyperplanes(t), static_cast<std::size_t>(bits_), dim_, v.values()), t});
  }
  return out;
}

ForwardingHash forwarding_hash(const LshFamily& family, const FeatureVector& v) {
  if (family.bits() != LshFamily::kForwardingBits) {
    throw Error(Errc::InvalidArgument, "forwarding hash requires a 16-bit family");
  }
  return ForwardingHash{family.signature(v, 0).bits};
}

std::size_t probe_count(int bits, int radius) {
  std::size_t total = 0;
  std::size_t choose = 1;  // C(bits, d)
  for (int d = 0; d <= radius; ++d) {
    total += choose;
    choose = choose * static_cast<std::size_t>(bits - d) / static_cast<std::size_t>(d + 1);
  }
  return total;
}

std::vector<LshSignature> probe_sequence(const LshSignature& sig, int bits, int radius) {
  if (bits < 1 || bits > 32) throw Error(Errc::InvalidArgument, "probe bits must be in [1,32]");
  if (radius < 0 || radius > bits) {
    throw Error(Errc::InvalidArgument,
                "probe radius " + std::to_string(radius) + " outside [0," + std::to_string(bits) + "]");
  }
  std::vector<LshSignature> out;
  out.reserve(probe_count(bits, radius));
  out.push_back(sig);

  std::vector<int> idx;
  for (int d = 1; d <= radius; ++d) {
    // Lexicographic enumeration of d-combinations of [0, bits).
    idx.resize(d);
    for (int i = 0; i < d; ++i) idx[i] = i;
    while (true) {
      std::uint32_t mask = 0;
      for (int i : idx) mask |= std::uint32_t{1} << i;
      out.push_back({sig.bits ^ mask, sig.table_index});

      int pos = d - 1;
      while (pos >= 0 && idx[pos] == bits - d + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int i = pos + 1; i < d; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  return out;
}

std::uint64_t string_hash(std::string_view s, std::uint64_t seed) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

FeatureVector feature_hash(std::span<const WeightedToken> tokens, std::size_t dim,
                           std::uint64_t seed) {
  if (dim == 0) throw Error(Errc::InvalidArgument, "feature hash needs dim >= 1");
  const std::uint64_t index_seed = derive_seed(seed, 1);
  const std::uint64_t sign_seed = derive_seed(seed, 2);
  std::vector<WeightedToken> sorted(tokens.begin(), tokens.end());
  std::sort(sorted.begin(), sorted.end(), [](const WeightedToken& a, const WeightedToken& b) {
    return a.token != b.token ? a.token < b.token : a.value < b.value;
  });
  std::vector<double> out(dim, 0.0);
  for (const auto& t : sorted) {
    const std::size_t i = string_hash(t.token, index_seed) % dim;
    const double sign = (string_hash(t.token, sign_seed) & 1U) ? 1.0 : -1.0;
    out[i] += sign * t.value;
  }
  return FeatureVector(std::move(out));
}

}  // namespace edgereuse
