#include <doctest.h>

#include <cmath>
#include <limits>

#include "edgereuse/core.hpp"
#include "edgereuse/rng.hpp"
#include "oracles.hpp"

using namespace edgereuse;

TEST_CASE("feature vectors reject empty and non-finite input") {
  CHECK_THROWS_AS(FeatureVector(std::vector<double>{}), Error);
  try {
    FeatureVector({1.0, std::numeric_limits<double>::quiet_NaN()});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFinite);
  }
  CHECK_THROWS_AS(FeatureVector({std::numeric_limits<double>::infinity()}), Error);
  CHECK(FeatureVector::zeros(4).is_zero());
  CHECK(FeatureVector::zeros(4).byte_size() == 32);
}

TEST_CASE("similarity examples") {
  Rng rng(11);
  const FeatureVector v(oracle::random_vector(rng, 32));
  CHECK(similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(similarity(FeatureVector{1, 0}, FeatureVector{0, 1}) == 0.0);
  CHECK(similarity(FeatureVector{1, 1}, FeatureVector{1, 0}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
  // negative cosine clamps to zero
  CHECK(similarity(FeatureVector{1, 0}, FeatureVector{-1, 0}) == 0.0);
}

TEST_CASE("similarity errors") {
  try {
    similarity(FeatureVector{1, 2}, FeatureVector{1, 2, 3});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimensionMismatch);
  }
  try {
    similarity(FeatureVector{0, 0}, FeatureVector{1, 2});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroVector);
  }
}

TEST_CASE("similarity matches the long-double oracle, is symmetric and scale invariant") {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const std::size_t dim = 1 + rng.below(100);
    const FeatureVector a(oracle::random_vector(rng, dim));
    const FeatureVector b(oracle::random_vector(rng, dim));
    const double c = std::exp(rng.uniform(-5, 5));
    const double s = similarity(a, b);
    CHECK(s == doctest::Approx(oracle::cosine(a, b)).epsilon(1e-12));
    CHECK(s == doctest::Approx(similarity(b, a)).epsilon(1e-14));
    CHECK(s == doctest::Approx(similarity(a.scaled(c), b)).epsilon(1e-12));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("threshold eligibility is monotone") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const FeatureVector a(oracle::random_vector(rng, 8));
    const FeatureVector b(oracle::random_vector(rng, 8));
    const double s = similarity(a, b);
    const double hi = rng.uniform();
    const double lo = rng.uniform(0, hi);
    if (SimilarityThreshold(hi).admits(s)) CHECK(SimilarityThreshold(lo).admits(s));
  }
}

TEST_CASE("thresholds") {
  CHECK(SimilarityThreshold(0.9).value() == 0.9);
  CHECK(SimilarityThreshold::from_user(90).value() == doctest::Approx(0.9));
  CHECK(SimilarityThreshold::from_user(0.6).value() == 0.6);
  CHECK(SimilarityThreshold::from_user(1.0).value() == 1.0);
  CHECK_THROWS_AS(SimilarityThreshold(1.5), Error);
  CHECK_THROWS_AS(SimilarityThreshold(-0.1), Error);
  CHECK_THROWS_AS(SimilarityThreshold::from_user(150), Error);
  CHECK(SimilarityThreshold(1.0).admits(1.0));
  CHECK_FALSE(SimilarityThreshold(1.0).admits(0.999999));
}

TEST_CASE("results_equal tolerance") {
  TaskResult a;
  a.service_id = "s";
  a.output = FeatureVector{0.5, 0.25, -1.0};
  a.label = 3;
  TaskResult b = a;
  CHECK(results_equal(a, b));
  b.output = FeatureVector{0.5, 0.25 + 1e-3, -1.0};
  CHECK_FALSE(results_equal(a, b));
  b.output = FeatureVector{0.5, 0.25 + 5e-10, -1.0};
  CHECK(results_equal(a, b));
  b = a;
  b.label = 4;
  CHECK_FALSE(results_equal(a, b));
  CHECK_FALSE(answers_match(a, b));
  b.service_id = "t";
  try {
    results_equal(a, b);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ServiceMismatch);
  }
}

TEST_CASE("reuse layer names round trip") {
  for (auto l : {ReuseLayer::None, ReuseLayer::Device, ReuseLayer::Network, ReuseLayer::Server,
                 ReuseLayer::PartialServer}) {
    CHECK(parse_reuse_layer(to_string(l)) == l);
  }
  CHECK_FALSE(parse_reuse_layer("cloud").has_value());
}

TEST_CASE("rng is reproducible and its helpers stay in range") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(6);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
    const auto k = r.between(3000, 4000);
    CHECK_UNARY(k >= 3000 && k <= 4000);
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.01).scale(1));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
