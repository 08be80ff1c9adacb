#include "doctest.h"
#include "tahp/rng.hpp"

using namespace tahp;

TEST_SUITE("rng") {

TEST_CASE("same seed gives the same stream") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different derivation paths give different streams") {
  RngStream a(derive_seed(7, {streams::kDropout, 0, 0}));
  RngStream b(derive_seed(7, {streams::kDropout, 0, 1}));
  RngStream c(derive_seed(7, {streams::kMcTrain, 0, 0}));
  CHECK(a.next_u64() != b.next_u64());
  CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("uniform01 stays in [0, 1) and covers the range") {
  RngStream rng(9);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("exponential has the requested mean") {
  RngStream rng(11);
  double sum = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("normal has zero mean and unit variance") {
  RngStream rng(13);
  double sum = 0.0, sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.03));
}

}  // TEST_SUITE
