#include <catch2/catch_amalgamated.hpp>

#include "dfmt/rng.hpp"

using dfmt::Rng;

TEST_CASE("same seed produces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams are independent of parent state") {
  Rng a(7);
  Rng d1 = a.derive(3);
  a.next_u64();
  a.next_u64();
  Rng d2 = Rng(7).derive(3);
  for (int i = 0; i < 100; ++i) REQUIRE(d1.next_u64() == d2.next_u64());
  REQUIRE(Rng(7).derive(3).next_u64() != Rng(7).derive(4).next_u64());
}

TEST_CASE("uniform doubles live in [0,1) with sane moments") {
  Rng r(123);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(mean - 0.5) < 0.005);
  REQUIRE(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("normal() has roughly standard moments") {
  Rng r(99);
  double sum = 0.0, sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double g = r.normal();
    sum += g;
    sumsq += g * g;
  }
  REQUIRE(std::abs(sum / n) < 0.02);
  REQUIRE(std::abs(sumsq / n - 1.0) < 0.03);
}
