#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "varprec/distributions.hpp"
#include "varprec/special.hpp"
#include "varprec/tensor.hpp"

using namespace varprec;
namespace ndt = varprec::nd;

TEST_SUITE_BEGIN("distributions");

TEST_CASE("normal log prob closed forms and mean gradient") {
  auto lp = dists::normal_log_prob(ndt::Tensor::scalar(1.0), ndt::Tensor::scalar(1.0),
                                   ndt::Tensor::scalar(1.0));
  CHECK(lp.value() == doctest::Approx(-0.5 * special::kLog2Pi).epsilon(1e-12));

  auto lp2 = dists::normal_log_prob(ndt::Tensor::scalar(2.0), ndt::Tensor::scalar(1.0),
                                    ndt::Tensor::scalar(1.0));
  CHECK(lp2.value() == doctest::Approx(-0.5 * (special::kLog2Pi + 1.0)).epsilon(1e-12));

  // d/dmu log N = lam (y - mu), cross-checked with finite differences
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const double y = rng.uniform(-2, 2), m0 = rng.uniform(-2, 2), lam = rng.uniform(0.2, 3);
    auto mu = ndt::Tensor::param({}, {m0});
    auto eval = [&]() {
      return dists::normal_log_prob(ndt::Tensor::scalar(y), mu, ndt::Tensor::scalar(lam)).value();
    };
    ndt::backward(dists::normal_log_prob(ndt::Tensor::scalar(y), mu, ndt::Tensor::scalar(lam)));
    const double fd = oracles::finite_difference(eval, mu, 0, 1e-6);
    CHECK(mu.grad()[0] == doctest::Approx(lam * (y - m0)).epsilon(1e-8));
    CHECK(mu.grad()[0] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("gamma entropy and KL closed forms") {
  auto h = dists::gamma_entropy(ndt::Tensor::scalar(1.0), ndt::Tensor::scalar(1.0));
  CHECK(h.value() == doctest::Approx(1.0).epsilon(1e-12));  // Exp(1)

  auto kl0 = dists::gamma_kl(ndt::Tensor::scalar(2.3), ndt::Tensor::scalar(0.7),
                             ndt::Tensor::scalar(2.3), ndt::Tensor::scalar(0.7));
  CHECK(kl0.value() == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS(dists::gamma_kl(ndt::Tensor::scalar(-1.0), ndt::Tensor::scalar(1.0),
                               ndt::Tensor::scalar(1.0), ndt::Tensor::scalar(1.0)));
}

TEST_CASE("gamma KL against a Monte Carlo oracle") {
  const double a1 = 2.0, b1 = 1.0, a2 = 1.0, b2 = 0.001;
  Rng rng(17);
  auto mc = oracles::mc_estimate(1000000, [&](std::int64_t) {
    const double z = rng.gamma(a1, b1);
    return special::gamma_log_pdf(z, a1, b1) - special::gamma_log_pdf(z, a2, b2);
  });
  const double analytic = dists::gamma_kl(ndt::Tensor::scalar(a1), ndt::Tensor::scalar(b1),
                                          ndt::Tensor::scalar(a2), ndt::Tensor::scalar(b2))
                              .value();
  CHECK(std::fabs(analytic - mc.mean) < 3.0 * mc.se);
}

TEST_CASE("gamma KL nonnegativity, zero iff equal") {
  Rng rng(23);
  for (int t = 0; t < 100; ++t) {
    const double a1 = rng.uniform(0.1, 6), b1 = rng.uniform(0.05, 5);
    const double a2 = rng.uniform(0.1, 6), b2 = rng.uniform(0.05, 5);
    const double kl = dists::gamma_kl(ndt::Tensor::scalar(a1), ndt::Tensor::scalar(b1),
                                      ndt::Tensor::scalar(a2), ndt::Tensor::scalar(b2))
                          .value();
    CHECK(kl >= -1e-12);
    if (std::fabs(a1 - a2) > 1e-3 || std::fabs(b1 - b2) > 1e-3) CHECK(kl > 1e-9);
  }
}

TEST_CASE("gamma sampling moments and pathwise gradients") {
  Rng rng(31);
  const double a = 2.0, b = 4.0;

  // sample mean hits alpha / beta
  {
    auto alpha = ndt::Tensor::from({}, {a});
    auto beta = ndt::Tensor::from({}, {b});
    auto z = dists::gamma_sample_n(alpha, beta, 100000, rng);
    double mean = 0.0;
    for (double v : z.values()) mean += v;
    mean /= static_cast<double>(z.size());
    const double sd = std::sqrt(a / (b * b) / static_cast<double>(z.size()));
    CHECK(std::fabs(mean - a / b) < 3.0 * sd);
  }

  // pathwise dE[z]/dalpha = 1/beta
  {
    auto alpha = ndt::Tensor::param({}, {a});
    auto beta = ndt::Tensor::param({}, {b});
    auto z = dists::gamma_sample_n(alpha, beta, 100000, rng);
    ndt::backward(ndt::mean(z));
    CHECK(alpha.grad()[0] == doctest::Approx(1.0 / b).epsilon(0.05));
    CHECK(beta.grad()[0] == doctest::Approx(-a / (b * b)).epsilon(0.05));
  }

  // pathwise d E[log z] / dalpha = trigamma(alpha)
  {
    auto alpha = ndt::Tensor::param({}, {a});
    auto beta = ndt::Tensor::param({}, {b});
    auto z = dists::gamma_sample_n(alpha, beta, 100000, rng);
    ndt::backward(ndt::mean(ndt::log(z)));
    CHECK(alpha.grad()[0] == doctest::Approx(special::trigamma(a)).epsilon(0.05));
  }

  CHECK(dists::gamma_sample_n(ndt::Tensor::scalar(1.0), ndt::Tensor::scalar(1.0), 0, rng).size() == 0);
  CHECK_THROWS(dists::gamma_sample(ndt::Tensor::scalar(-1.0), ndt::Tensor::scalar(1.0), rng));
}

TEST_CASE("student t closed form, quadrature, limits, symmetry") {
  // alpha = beta = 1 compound at zero: t with 2 dof
  const double lp = dists::student_t_log_prob(ndt::Tensor::scalar(0.0), ndt::Tensor::scalar(2.0),
                                              ndt::Tensor::scalar(0.0), ndt::Tensor::scalar(1.0))
                        .value();
  CHECK(lp == doctest::Approx(std::log(std::tgamma(1.5) / std::sqrt(2.0 * M_PI))).epsilon(1e-12));
  CHECK(lp == doctest::Approx(oracles::log_compound_normal_gamma(0.0, 0.0, 1.0, 1.0)).epsilon(1e-6));

  // large nu approaches the normal density
  const double lp_t = dists::student_t_log_prob(ndt::Tensor::scalar(0.7), ndt::Tensor::scalar(1e6),
                                                ndt::Tensor::scalar(0.2), ndt::Tensor::scalar(1.0))
                          .value();
  const double lp_n = dists::normal_log_prob(ndt::Tensor::scalar(0.7), ndt::Tensor::scalar(0.2),
                                             ndt::Tensor::scalar(1.0))
                          .value();
  CHECK(lp_t == doctest::Approx(lp_n).epsilon(1e-4));

  // symmetry about the location
  Rng rng(41);
  for (int t = 0; t < 20; ++t) {
    const double nu = rng.uniform(0.5, 30), mu = rng.uniform(-3, 3), s = rng.uniform(0.1, 4);
    const double d = rng.uniform(0, 5);
    const double l1 = dists::student_t_log_prob(ndt::Tensor::scalar(mu + d), ndt::Tensor::scalar(nu),
                                                ndt::Tensor::scalar(mu), ndt::Tensor::scalar(s))
                          .value();
    const double l2 = dists::student_t_log_prob(ndt::Tensor::scalar(mu - d), ndt::Tensor::scalar(nu),
                                                ndt::Tensor::scalar(mu), ndt::Tensor::scalar(s))
                          .value();
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  }
  CHECK_THROWS(dists::student_t_log_prob(ndt::Tensor::scalar(0.0), ndt::Tensor::scalar(-2.0),
                                         ndt::Tensor::scalar(0.0), ndt::Tensor::scalar(1.0)));
}

TEST_CASE("compound identity: Gamma-Normal integral equals Student-t(2a, mu, sqrt(b/a))") {
  Rng rng(43);
  for (int t = 0; t < 50; ++t) {
    const double a = rng.uniform(0.5, 5.0), b = rng.uniform(0.2, 5.0);
    const double mu = rng.uniform(-3, 3);
    const double y = mu + rng.uniform(-3, 3) * std::sqrt(b / a);
    const double via_t =
        dists::student_t_log_prob(ndt::Tensor::scalar(y), ndt::Tensor::scalar(2.0 * a),
                                  ndt::Tensor::scalar(mu), ndt::Tensor::scalar(std::sqrt(b / a)))
            .value();
    const double via_quad = oracles::log_compound_normal_gamma(y, mu, a, b);
    CHECK(via_t == doctest::Approx(via_quad).epsilon(1e-5));
  }
}

TEST_CASE("mixture basics") {
  // single component behaves like the component itself
  auto single = dists::single_component({dists::normal_component(0.5, 2.0)});
  const double y = 1.3;
  const double direct = dists::normal_component(0.5, 2.0).log_pdf(y);
  CHECK(dists::mixture_log_prob(single, std::vector<double>{y}) == doctest::Approx(direct));
  CHECK(dists::mixture_mean(single)[0] == doctest::Approx(0.5));
  CHECK(dists::mixture_variance(single)[0] == doctest::Approx(2.0));

  // two equal-weight normals at +-1 with unit variance: total variance 2
  auto two = dists::uniform_mixture({{dists::normal_component(1.0, 1.0)},
                                     {dists::normal_component(-1.0, 1.0)}});
  CHECK(dists::mixture_variance(two)[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(dists::mixture_mean(two)[0] == doctest::Approx(0.0));

  // invalid simplex rejected
  dists::PredictiveDist bad;
  bad.weights = {0.7, 0.7};
  bad.components = {{dists::normal_component(0, 1)}, {dists::normal_component(0, 1)}};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("20-component uniform Student-t mixture log prob equals brute-force summation") {
  Rng rng(53);
  std::vector<std::vector<dists::Component>> comps;
  for (int j = 0; j < 20; ++j)
    comps.push_back({dists::student_t_component(rng.uniform(3, 30), rng.uniform(-2, 2),
                                                rng.uniform(0.2, 2))});
  auto mix = dists::uniform_mixture(comps);
  for (int t = 0; t < 20; ++t) {
    const double y = rng.uniform(-4, 4);
    double acc = 0.0;
    for (int j = 0; j < 20; ++j) acc += std::exp(mix.components[static_cast<std::size_t>(j)][0].log_pdf(y));
    const double brute = std::log(acc / 20.0);
    CHECK(mix.log_prob(std::vector<double>{y}) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("mixture sampling matches mixture mean") {
  Rng rng(59);
  auto mix = dists::uniform_mixture({{dists::normal_component(-2.0, 0.5)},
                                     {dists::normal_component(1.0, 1.5)},
                                     {dists::student_t_component(8.0, 3.0, 0.7)}});
  auto stats = oracles::mc_estimate(100000, [&](std::int64_t) { return mix.sample(rng)[0]; });
  CHECK(std::fabs(stats.mean - mix.mean()[0]) < 4.0 * stats.se);
}

TEST_CASE("log probabilities stay finite over twelve orders of magnitude") {
  for (double scale = 1e-6; scale <= 1e6 + 1; scale *= 10.0) {
    const double lp_n = dists::normal_component(0.0, scale * scale).log_pdf(0.3 * scale);
    const double lp_t = dists::student_t_component(4.0, 0.0, scale).log_pdf(0.3 * scale);
    CHECK(std::isfinite(lp_n));
    CHECK(std::isfinite(lp_t));
    const double lp_g =
        dists::gamma_log_prob(ndt::Tensor::scalar(scale), ndt::Tensor::scalar(2.0),
                              ndt::Tensor::scalar(1.0 / scale))
            .value();
    CHECK(std::isfinite(lp_g));
  }
}

TEST_SUITE_END();
