#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "varprec/rng.hpp"
#include "varprec/special.hpp"

using namespace varprec;

TEST_SUITE_BEGIN("special");

TEST_CASE("digamma recurrence and known values") {
  for (double x = 0.05; x < 30.0; x += 0.213) {
    CHECK(special::digamma(x + 1.0) ==
          doctest::Approx(special::digamma(x) + 1.0 / x).epsilon(1e-11));
  }
  CHECK(special::digamma(1.0) == doctest::Approx(-special::kEulerGamma).epsilon(1e-13));
  CHECK(special::digamma(0.5) ==
        doctest::Approx(-special::kEulerGamma - 2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS(special::digamma(0.0));
}

TEST_CASE("trigamma recurrence and known values") {
  for (double x = 0.05; x < 30.0; x += 0.217) {
    CHECK(special::trigamma(x + 1.0) ==
          doctest::Approx(special::trigamma(x) - 1.0 / (x * x)).epsilon(1e-11));
  }
  CHECK(special::trigamma(1.0) == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
}

TEST_CASE("regularized incomplete gamma") {
  CHECK(special::reg_lower_gamma(2.0, 0.0) == 0.0);
  // P(1, x) = 1 - exp(-x)
  for (double x : {0.1, 0.7, 1.3, 4.0, 9.0})
    CHECK(special::reg_lower_gamma(1.0, x) == doctest::Approx(-std::expm1(-x)).epsilon(1e-12));
  // monotone increasing in x
  double prev = 0.0;
  for (double x = 0.05; x < 20.0; x += 0.191) {
    const double p = special::reg_lower_gamma(3.3, x);
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(special::reg_lower_gamma(3.3, 200.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softplus inverse round-trip") {
  for (double x : {-20.0, -3.0, -0.5, 0.0, 0.5, 3.0, 20.0})
    CHECK(special::softplus_inverse(special::softplus(x)) == doctest::Approx(x).epsilon(1e-9));
}

TEST_CASE("gamma MLE fit recovers parameters") {
  Rng rng(99);
  const double shape = 2.7, rate = 1.9;
  std::vector<double> xs(200000);
  for (auto& v : xs) v = rng.gamma(shape, rate);
  auto fit = special::gamma_fit_mle(xs.data(), static_cast<long>(xs.size()));
  CHECK(fit.shape == doctest::Approx(shape).epsilon(0.02));
  CHECK(fit.rate == doctest::Approx(rate).epsilon(0.02));
}

TEST_CASE("rng gamma moments") {
  Rng rng(123);
  const double a = 2.0, b = 4.0;
  auto stats = oracles::mc_estimate(100000, [&](std::int64_t) { return rng.gamma(a, b); });
  CHECK(std::fabs(stats.mean - a / b) < 3.0 * stats.se);
}

TEST_SUITE_END();
