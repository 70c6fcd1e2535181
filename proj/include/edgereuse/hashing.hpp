#pragma once

// Sign-random-projection LSH, multi-probe sequences, and feature hashing.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edgereuse/core.hpp"

namespace edgereuse {

struct LshSignature {
  std::uint32_t bits = 0;
  int table_index = 0;

  friend constexpr bool operator==(const LshSignature&, const LshSignature&) = default;
};

/// L tables of k unit hyperplanes each, a pure function of (seed, dim, k, L).
class LshFamily {
 public:
  static constexpr int kForwardingBits = 16;

  LshFamily(std::uint64_t seed, std::size_t dim, int bits = kForwardingBits, int tables = 4);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim() const noexcept { return dim_; }
  int bits() const noexcept { return bits_; }
  int tables() const noexcept { return tables_; }

  /// Row-major k x dim block of hyperplanes for one table.
  std::span<const double> hyperplanes(int table) const;

  LshSignature signature(const FeatureVector& v, int table) const;
  std::vector<LshSignature> signatures(const FeatureVector& v) const;

 private:
  void check_input(const FeatureVector& v) const;

  std::uint64_t seed_;
  std::size_t dim_;
  int bits_;
  int tables_;
  std::vector<double> planes_;  // tables x bits x dim
};

/// Table-0 signature of a k=16 family.
ForwardingHash forwarding_hash(const LshFamily& family, const FeatureVector& v);

/// sig, then every signature at Hamming distance 1, 2, ... radius. Within a
/// distance class the flipped-index tuples are in ascending lexicographic order.
std::vector<LshSignature> probe_sequence(const LshSignature& sig, int bits, int radius);

/// Number of entries probe_sequence returns.
std::size_t probe_count(int bits, int radius);

struct WeightedToken {
  std::string token;
  double value = 1.0;
};

/// Signed hashing-trick vectorizer. Empty input yields the zero vector.
/// Contributions are summed in sorted token order, so input order never
/// changes a single bit of the result.
FeatureVector feature_hash(std::span<const WeightedToken> tokens, std::size_t dim,
                                 std::uint64_t seed);

/// Seeded 64-bit string hash (FNV-1a core with a splitmix finalizer).
std::uint64_t string_hash(std::string_view s, std::uint64_t seed) noexcept;

}  // namespace edgereuse
