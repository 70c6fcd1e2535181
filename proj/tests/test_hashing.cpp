#include <doctest.h>

#include <algorithm>
#include <bit>
#include <numbers>
#include <set>

#include "edgereuse/hashing.hpp"
#include "edgereuse/kernels.hpp"
#include "oracles.hpp"

using namespace edgereuse;

TEST_CASE("signature is deterministic and positive-scale invariant") {
  const LshFamily f(1, 64);
  const LshFamily g(1, 64);
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const FeatureVector v(oracle::random_vector(rng, 64));
    for (int t = 0; t < f.tables(); ++t) {
      CHECK(f.signature(v, t) == f.signature(v, t));
      CHECK(f.signature(v, t) == g.signature(v, t));
      CHECK(f.signature(v, t).bits == f.signature(v.scaled(2.0), t).bits);
      CHECK(f.signature(v, t).bits == f.signature(v.scaled(1e-6), t).bits);
    }
    CHECK(forwarding_hash(f, v) == forwarding_hash(f, v.scaled(37.5)));
  }
}

TEST_CASE("negation complements every bit") {
  const LshFamily f(2, 48);
  Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    const auto x = oracle::random_vector(rng, 48);
    const FeatureVector v(x);
    const FeatureVector neg = v.scaled(-1.0);
    for (int t = 0; t < f.tables(); ++t) CHECK((f.signature(v, t).bits ^ f.signature(neg, t).bits) == 0xFFFFu);
  }
}

TEST_CASE("signatures match a direct sign computation over the hyperplanes") {
  const LshFamily f(3, 20, 12, 3);
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    const auto x = oracle::random_vector(rng, 20);
    for (int t = 0; t < 3; ++t) {
      const auto planes = f.hyperplanes(t);
      CHECK(f.signature(FeatureVector(x), t).bits == oracle::sign_bits(planes.data(), 12, 20, x));
    }
  }
  // hyperplanes are unit length
  for (int t = 0; t < 3; ++t) {
    const auto planes = f.hyperplanes(t);
    for (int r = 0; r < 12; ++r) {
      std::vector<double> row(planes.begin() + r * 20, planes.begin() + (r + 1) * 20);
      CHECK(static_cast<double>(oracle::dot(row, row)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("forwarding hash stays inside 16 bits") {
  const LshFamily f(4, 64);
  Rng rng(34);
  std::uint32_t hi = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto h = forwarding_hash(f, FeatureVector(oracle::random_vector(rng, 64)));
    hi = std::max(hi, h.value);
  }
  CHECK(hi <= ForwardingHash::kMax);
  CHECK(hi > 60000);  // the top of the range is actually reached
  CHECK_THROWS_AS(forwarding_hash(LshFamily(4, 64, 8, 1), FeatureVector(oracle::random_vector(rng, 64))), Error);
}

TEST_CASE("per-bit agreement follows 1 - theta/pi") {
  const std::size_t dim = 32;
  Rng rng(35);
  for (double theta : {std::numbers::pi / 8, std::numbers::pi / 4, std::numbers::pi / 2}) {
    CAPTURE(theta);
    const int pairs = 10000;
    std::size_t agree = 0, total = 0;
    for (int i = 0; i < pairs; ++i) {
      // fresh family per pair so the estimate averages over hyperplanes as well
      const LshFamily f(rng.next(), dim, 16, 1);
      const auto a = oracle::unit(oracle::random_vector(rng, dim));
      const auto b = oracle::at_angle(rng, a, theta);
      const auto sa = f.signature(FeatureVector(a), 0).bits;
      const auto sb = f.signature(FeatureVector(b), 0).bits;
      agree += 16 - static_cast<std::size_t>(std::popcount(sa ^ sb));
      total += 16;
    }
    const double rate = static_cast<double>(agree) / static_cast<double>(total);
    CHECK(std::abs(rate - (1.0 - theta / std::numbers::pi)) <= 0.02);
  }
}

TEST_CASE("probe sequence counts and order") {
  const LshSignature sig{0b1010, 2};
  CHECK(probe_sequence(sig, 16, 0) == std::vector<LshSignature>{sig});
  CHECK(probe_count(16, 1) == 17);
  CHECK(probe_count(16, 2) == 137);
  for (int bits : {4, 8, 16}) {
    for (int r = 0; r <= std::min(bits, 3); ++r) {
      const auto seq = probe_sequence(sig, bits, r);
      std::size_t expect = 0;
      for (int d = 0; d <= r; ++d) expect += oracle::choose(bits, d);
      CHECK(seq.size() == expect);
      CHECK(seq.size() == probe_count(bits, r));
      std::set<std::uint32_t> seen;
      int last_distance = 0;
      for (const auto& s : seq) {
        CHECK(s.table_index == 2);
        CHECK(seen.insert(s.bits).second);
        const int d = std::popcount(s.bits ^ sig.bits);
        CHECK(d <= r);
        CHECK(d >= last_distance);
        last_distance = d;
      }
      if (r > 0) {
        const auto shorter = probe_sequence(sig, bits, r - 1);
        CHECK(std::equal(shorter.begin(), shorter.end(), seq.begin()));
      }
    }
  }
  // distance 1 flips bit 0 first, distance 2 starts at {0,1}
  const auto seq = probe_sequence(LshSignature{0, 0}, 16, 2);
  CHECK(seq[1].bits == 1u);
  CHECK(seq[16].bits == (1u << 15));
  CHECK(seq[17].bits == 0b11u);
  CHECK(seq[18].bits == 0b101u);
  CHECK(probe_sequence(LshSignature{0, 0}, 8, 8).size() == 256);
  CHECK_THROWS_AS(probe_sequence(sig, 8, 9), Error);
}

TEST_CASE("feature hashing") {
  const std::vector<WeightedToken> none;
  CHECK(feature_hash(none, 16, 1).is_zero());
  CHECK(feature_hash(none, 16, 1).dim() == 16);

  std::vector<WeightedToken> toks{{"car", 1.0}, {"red", 0.5}, {"left", 2.0}, {"car", 0.25}};
  const auto v = feature_hash(toks, 32, 9);
  std::reverse(toks.begin(), toks.end());
  CHECK(feature_hash(toks, 32, 9) == v);
  std::rotate(toks.begin(), toks.begin() + 1, toks.end());
  CHECK(feature_hash(toks, 32, 9) == v);

  const std::vector<WeightedToken> twice{{"a", 1.0}, {"a", 1.0}};
  const std::vector<WeightedToken> once{{"a", 2.0}};
  CHECK(feature_hash(twice, 32, 3) == feature_hash(once, 32, 3));

  // a single token lands in exactly one slot with magnitude equal to its weight
  const std::vector<WeightedToken> single{{"zebra", 3.0}};
  const auto s = feature_hash(single, 64, 4);
  int nonzero = 0;
  for (double x : s.values()) {
    if (x != 0.0) {
      ++nonzero;
      CHECK(std::abs(x) == 3.0);
    }
  }
  CHECK(nonzero == 1);
  int moved = 0;
  for (std::uint64_t seed = 5; seed < 15; ++seed) moved += feature_hash(single, 64, seed) != s;
  CHECK(moved > 0);
  CHECK(string_hash("abc", 1) == string_hash("abc", 1));
  CHECK(string_hash("abc", 1) != string_hash("abd", 1));
}
