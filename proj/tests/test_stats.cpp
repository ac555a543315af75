#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bvlmc/error.hpp"
#include "bvlmc/stats.hpp"
#include "oracles.hpp"

using namespace bvlmc;
using doctest::Approx;

TEST_CASE("df = 2 closed form") {
  CHECK(chi2_cdf(2.0 * std::log(20.0), 2) == Approx(0.95).epsilon(1e-14));
  for (int i = 0; i <= 1000; ++i) {
    const double x = 0.1 * i;
    CHECK(std::abs(chi2_cdf(x, 2) - (1.0 - std::exp(-x / 2.0))) <= 1e-12);
    CHECK(std::abs(chi2_sf(x, 2) - std::exp(-x / 2.0)) <= 1e-12 * std::max(1e-300, std::exp(-x / 2.0)) + 1e-300);
  }
  CHECK(chi2_quantile(0.95, 2) == Approx(5.991465).epsilon(1e-7));
  CHECK(std::abs(chi2_quantile(0.95, 2) - 2.0 * std::log(20.0)) <= 1e-9);
}

TEST_CASE("cdf matches the quadrature oracle") {
  CHECK(chi2_cdf(3.841459, 1) == Approx(0.95).epsilon(1e-6));
  for (int df : {1, 2, 3, 4, 5, 7, 10, 25}) {
    CHECK(chi2_cdf(0.0, df) == 0.0);
    for (double x : {0.01, 0.5, 1.0, 2.5, 4.0, 8.0, 15.0, 30.0, 60.0}) {
      CHECK(std::abs(chi2_cdf(x, df) - oracle::chi2_cdf_quadrature(x, df)) <= 1e-10);
      CHECK(std::abs(chi2_cdf(x, df) + chi2_sf(x, df) - 1.0) <= 1e-14);
    }
  }
  CHECK(chi2_quantile(0.5, 5) == Approx(4.351460).epsilon(1e-6));
  CHECK(std::abs(oracle::chi2_cdf_quadrature(chi2_quantile(0.5, 5), 5) - 0.5) <= 1e-9);
}

TEST_CASE("upper tail keeps precision far out") {
  // sf(x, 2) = exp(-x/2) exactly.
  CHECK(chi2_sf(200.0, 2) == Approx(std::exp(-100.0)).epsilon(1e-12));
  CHECK(chi2_sf(500.0, 1) > 0.0);
  CHECK(chi2_sf(500.0, 1) < 1e-100);
}

TEST_CASE("monotone with limits") {
  for (int df : {1, 3, 8}) {
    double prev = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double v = chi2_cdf(0.25 * i, df);
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(chi2_cdf(1e4, df) == 1.0);
  }
}

TEST_CASE("quantile round trip") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ux(0.05, 40.0);
  for (int i = 0; i < 500; ++i) {
    const int df = 1 + i % 12;
    double x = ux(rng);
    while (chi2_sf(x, df) < 1e-6) x = ux(rng);
    CHECK(std::abs(chi2_quantile(chi2_cdf(x, df), df) - x) <= 1e-8);
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(chi2_cdf(-1.0, 2), DomainError);
  CHECK_THROWS_AS(chi2_cdf(1.0, 0), DomainError);
  CHECK_THROWS_AS(chi2_quantile(0.0, 2), DomainError);
  CHECK_THROWS_AS(chi2_quantile(1.0, 2), DomainError);
  CHECK_THROWS_AS(lrt(-1.0, -2.0, 1), NestingViolation);
}

TEST_CASE("lrt") {
  const LrtResult same = lrt(-10.0, -10.0, 3);
  CHECK(same.lambda == 0.0);
  CHECK(same.p_value == 1.0);

  const LrtResult r = lrt(-100.0, -100.0 + 2.9957, 2);
  CHECK(r.lambda == Approx(5.9914).epsilon(1e-12));
  CHECK(r.p_value == Approx(0.05).epsilon(1e-3));
  CHECK(r.df == 2);

  const LrtResult clamped = lrt(-5.0, -5.0 - 1e-9, 1);
  CHECK(clamped.clamped);
  CHECK(clamped.lambda == 0.0);
  CHECK(clamped.p_value == 1.0);
}
