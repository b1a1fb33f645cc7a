#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "varprec/distributions.hpp"
#include "varprec/priors.hpp"
#include "varprec/special.hpp"
#include "varprec/tensor.hpp"

using namespace varprec;
namespace ndt = varprec::nd;

TEST_SUITE_BEGIN("priors");

namespace {

priors::HeadFns no_heads() { return {}; }

priors::HeadFns constant_heads(double alpha, double beta, std::int64_t d_out, std::int64_t k) {
  priors::HeadFns h;
  h.alpha_beta = [=](const ndt::Tensor& u) {
    const std::int64_t m = u.dim(0);
    return std::make_pair(ndt::Tensor::full({m, d_out}, alpha), ndt::Tensor::full({m, d_out}, beta));
  };
  h.mixture_logits = [=](const ndt::Tensor& x) { return ndt::Tensor::zeros({x.dim(0), k}); };
  return h;
}

}  // namespace

TEST_CASE("vap prior always contributes zero") {
  Rng rng(1);
  priors::PriorSpec vap;
  vap.kind = priors::Kind::Vap;
  auto qa = ndt::Tensor::from({3, 2}, {1.5, 2.0, 3.0, 1.1, 0.7, 2.2});
  auto qb = ndt::Tensor::from({3, 2}, {0.5, 1.0, 2.0, 0.4, 0.9, 1.5});
  auto kl = priors::kl_term(vap, qa, qb, no_heads(), ndt::Tensor::zeros({3, 1}), rng);
  CHECK(kl.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(kl.at(i) == 0.0);
}

TEST_CASE("standard prior equals the analytic Gamma KL") {
  Rng rng(2);
  priors::PriorSpec std_prior;
  std_prior.kind = priors::Kind::Standard;
  std_prior.a = 1.0;
  std_prior.b = 0.001;
  auto qa = ndt::Tensor::from({2, 1}, {2.0, 1.4});
  auto qb = ndt::Tensor::from({2, 1}, {1.0, 0.25});
  auto kl = priors::kl_term(std_prior, qa, qb, no_heads(), ndt::Tensor::zeros({2, 1}), rng);
  for (int i = 0; i < 2; ++i) {
    const double expect = dists::gamma_kl(ndt::Tensor::scalar(qa.at(i)), ndt::Tensor::scalar(qb.at(i)),
                                          ndt::Tensor::scalar(1.0), ndt::Tensor::scalar(0.001))
                              .value();
    CHECK(kl.at(i) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("xvamp with a single self-matching component gives zero KL in expectation") {
  Rng rng(3);
  priors::PriorSpec prior;
  prior.kind = priors::Kind::XVamp;
  prior.k = 1;
  prior.pseudo_inputs = ndt::Tensor::from({1, 1}, {0.0});
  const double a0 = 2.3, b0 = 1.7;
  auto heads = constant_heads(a0, b0, 1, 1);
  auto qa = ndt::Tensor::full({4, 1}, a0);
  auto qb = ndt::Tensor::full({4, 1}, b0);
  auto x = ndt::Tensor::zeros({4, 1});
  auto stats = oracles::mc_estimate(4000, [&](std::int64_t) {
    auto kl = priors::kl_term(prior, qa, qb, heads, x, rng);
    double m = 0.0;
    for (double v : kl.values()) m += v;
    return m / static_cast<double>(kl.size());
  });
  CHECK(std::fabs(stats.mean) < 4.0 * stats.se);
}

TEST_CASE("single-component vbem matches the analytic Gamma-Gamma KL") {
  Rng rng(5);
  priors::PriorSpec prior;
  prior.kind = priors::Kind::Vbem;
  prior.k = 1;
  prior.vbem_a = ndt::Tensor::from({1}, {1.3});
  prior.vbem_b = ndt::Tensor::from({1}, {0.8});
  priors::HeadFns heads;
  heads.mixture_logits = [](const ndt::Tensor& x) { return ndt::Tensor::zeros({x.dim(0), 1}); };
  auto qa = ndt::Tensor::from({1, 1}, {2.6});
  auto qb = ndt::Tensor::from({1, 1}, {1.2});
  auto x = ndt::Tensor::zeros({1, 1});
  auto stats = oracles::mc_estimate(100000, [&](std::int64_t) {
    return priors::kl_term(prior, qa, qb, heads, x, rng).at(0);
  });
  const double analytic = dists::gamma_kl(ndt::Tensor::scalar(2.6), ndt::Tensor::scalar(1.2),
                                          ndt::Tensor::scalar(1.3), ndt::Tensor::scalar(0.8))
                              .value();
  CHECK(std::fabs(stats.mean - analytic) < 3.0 * stats.se);
}

TEST_CASE("init_prior builds the fixed vbem grid") {
  Rng rng(7);
  auto spec = priors::init_prior(priors::Kind::Vbem, {}, ndt::Tensor::zeros({5, 1}), rng);
  CHECK(spec.k == 144);
  CHECK(spec.vbem_a.at(0) == doctest::Approx(0.05));
  CHECK(spec.vbem_b.at(0) == doctest::Approx(0.05));
  CHECK(spec.vbem_a.at(143) == doctest::Approx(4.0));
  CHECK(spec.vbem_b.at(143) == doctest::Approx(4.0));
}

TEST_CASE("init_prior samples distinct training rows for vamp") {
  Rng rng(11);
  const std::int64_t n = 300, d = 3;
  std::vector<double> xs(static_cast<std::size_t>(n * d));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  auto train = ndt::Tensor::from({n, d}, xs);
  priors::PriorConfig cfg;
  cfg.k = 100;
  auto spec = priors::init_prior(priors::Kind::Vamp, cfg, train, rng);
  CHECK(spec.k == 100);
  CHECK(spec.pseudo_inputs.shape() == ndt::Shape{100, 3});
  CHECK_FALSE(spec.pseudo_inputs.requires_grad());
  // sampled without replacement: leading coordinates must be distinct
  std::vector<double> first_coords;
  for (int j = 0; j < 100; ++j) first_coords.push_back(spec.pseudo_inputs.at(j * 3));
  std::sort(first_coords.begin(), first_coords.end());
  CHECK(std::adjacent_find(first_coords.begin(), first_coords.end()) == first_coords.end());

  cfg.k = 400;  // more than n rows
  CHECK_THROWS(priors::init_prior(priors::Kind::Vamp, cfg, train, rng));
}

TEST_CASE("init_prior ranged pseudo-inputs and trainable vbem") {
  Rng rng(13);
  priors::PriorConfig cfg;
  cfg.k = 20;
  cfg.init_from_range = true;
  cfg.range_lo = -4.0;
  cfg.range_hi = 14.0;
  auto spec = priors::init_prior(priors::Kind::XVampStar, cfg, ndt::Tensor::zeros({5, 1}), rng);
  CHECK(spec.k == 20);
  CHECK(spec.pseudo_inputs.requires_grad());
  for (int j = 0; j < 20; ++j) {
    CHECK(spec.pseudo_inputs.at(j) >= -4.0);
    CHECK(spec.pseudo_inputs.at(j) <= 14.0);
  }

  priors::PriorConfig vcfg;
  vcfg.k = 24;
  auto vspec = priors::init_prior(priors::Kind::VbemStar, vcfg, ndt::Tensor::zeros({5, 1}), rng);
  CHECK(vspec.k == 24);
  for (int j = 0; j < 24; ++j) {
    CHECK(vspec.vbem_raw_a.at(j) >= -3.0);
    CHECK(vspec.vbem_raw_a.at(j) <= 3.0);
  }
  ndt::ParamStore store;
  vspec.register_params(store);
  CHECK(store.has("prior.raw_a"));
  CHECK(store.has("prior.raw_b"));
}

TEST_CASE("kl estimates respect nonnegativity up to monte carlo noise") {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    const double qa0 = rng.uniform(0.5, 4.0), qb0 = rng.uniform(0.2, 3.0);
    auto qa = ndt::Tensor::full({2, 1}, qa0);
    auto qb = ndt::Tensor::full({2, 1}, qb0);
    auto x = ndt::Tensor::zeros({2, 1});

    priors::PriorSpec prior;
    priors::HeadFns heads;
    const int pick = t % 3;
    if (pick == 0) {
      prior.kind = priors::Kind::Vamp;
      prior.k = 5;
      prior.pseudo_inputs = ndt::Tensor::zeros({5, 1});
      heads = constant_heads(rng.uniform(0.5, 4.0), rng.uniform(0.2, 3.0), 1, 5);
    } else if (pick == 1) {
      prior.kind = priors::Kind::XVamp;
      prior.k = 4;
      prior.pseudo_inputs = ndt::Tensor::zeros({4, 1});
      heads = constant_heads(rng.uniform(0.5, 4.0), rng.uniform(0.2, 3.0), 1, 4);
    } else {
      prior.kind = priors::Kind::Vbem;
      prior.k = 3;
      prior.vbem_a = ndt::Tensor::from({3}, {rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)});
      prior.vbem_b = ndt::Tensor::from({3}, {rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)});
      heads.mixture_logits = [](const ndt::Tensor& xx) { return ndt::Tensor::zeros({xx.dim(0), 3}); };
    }
    auto stats = oracles::mc_estimate(400, [&](std::int64_t) {
      return priors::kl_term(prior, qa, qb, heads, x, rng).at(0);
    });
    CHECK(stats.mean >= -4.0 * stats.se);
  }
}

TEST_CASE("vamp term is invariant to permuting pseudo-inputs") {
  priors::PriorSpec prior;
  prior.kind = priors::Kind::Vamp;
  prior.k = 6;
  prior.pseudo_inputs = ndt::Tensor::from({6, 1}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  priors::HeadFns heads;
  heads.alpha_beta = [](const ndt::Tensor& u) {
    auto a = ndt::softplus(u * 0.3) + 1.0;
    auto b = ndt::softplus(u * -0.2) + 0.1;
    return std::make_pair(a, b);
  };
  auto qa = ndt::Tensor::full({3, 1}, 2.0);
  auto qb = ndt::Tensor::full({3, 1}, 1.0);
  auto x = ndt::Tensor::zeros({3, 1});
  Rng rng1(99), rng2(99);  // identical lam draws
  auto kl1 = priors::kl_term(prior, qa, qb, heads, x, rng1);
  prior.pseudo_inputs = ndt::Tensor::from({6, 1}, {5.0, 3.0, 1.0, 0.0, 4.0, 2.0});
  auto kl2 = priors::kl_term(prior, qa, qb, heads, x, rng2);
  for (int i = 0; i < 3; ++i) CHECK(kl1.at(i) == doctest::Approx(kl2.at(i)).epsilon(1e-10));
}

TEST_CASE("gradients reach trainable pseudo-inputs and mixture logits") {
  Rng rng(23);
  priors::PriorConfig cfg;
  cfg.k = 4;
  cfg.init_standard_normal = true;
  auto prior = priors::init_prior(priors::Kind::XVampStar, cfg, ndt::Tensor::zeros({8, 2}), rng);
  auto w = ndt::Tensor::param({2, 1}, {0.4, -0.3});
  auto pi_w = ndt::Tensor::param({2, 4}, std::vector<double>(8, 0.1));
  priors::HeadFns heads;
  heads.alpha_beta = [&](const ndt::Tensor& u) {
    auto h = ndt::matmul(u, w);
    return std::make_pair(ndt::softplus(h) + 1.0, ndt::softplus(h * -1.0) + 0.1);
  };
  heads.mixture_logits = [&](const ndt::Tensor& x) { return ndt::matmul(x, pi_w); };
  auto qa = ndt::Tensor::full({5, 1}, 2.0);
  auto qb = ndt::Tensor::full({5, 1}, 1.0);
  std::vector<double> xv(10);
  for (auto& v : xv) v = rng.normal();
  auto x = ndt::Tensor::from({5, 2}, xv);
  auto kl = priors::kl_term(prior, qa, qb, heads, x, rng);
  ndt::backward(ndt::sum(kl));
  CHECK_FALSE(prior.pseudo_inputs.grad().empty());
  CHECK_FALSE(pi_w.grad().empty());
  CHECK_FALSE(w.grad().empty());
}

TEST_CASE("a prior-parameter step in the gradient direction does not increase the KL") {
  Rng rng(29);
  priors::PriorConfig cfg;
  cfg.k = 8;
  auto prior = priors::init_prior(priors::Kind::VbemStar, cfg, ndt::Tensor::zeros({4, 1}), rng);
  priors::HeadFns heads;
  heads.mixture_logits = [&](const ndt::Tensor& x) { return ndt::Tensor::zeros({x.dim(0), 8}); };
  auto qa = ndt::Tensor::from({6, 1}, {1.5, 2.0, 2.5, 3.0, 1.2, 1.8});
  auto qb = ndt::Tensor::from({6, 1}, {0.5, 1.0, 1.5, 0.8, 1.1, 0.6});
  auto x = ndt::Tensor::zeros({6, 1});

  const int reps = 400;
  auto estimate = [&](Rng& r) {
    return oracles::mc_estimate(reps, [&](std::int64_t) {
      auto kl = priors::kl_term(prior, qa, qb, heads, x, r);
      double m = 0.0;
      for (double v : kl.values()) m += v;
      return m / static_cast<double>(kl.size());
    });
  };

  Rng r_before(101);
  auto before = estimate(r_before);

  // averaged-gradient step on the prior parameters, q held fixed
  prior.vbem_raw_a.zero_grad();
  prior.vbem_raw_b.zero_grad();
  Rng r_grad(202);
  for (int i = 0; i < reps; ++i) {
    auto kl = priors::kl_term(prior, qa, qb, heads, x, r_grad);
    ndt::backward(ndt::mean(kl) / static_cast<double>(reps));
  }
  const double lr = 0.05;
  auto step = [&](ndt::Tensor t) {
    auto g = t.grad();
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  };
  step(prior.vbem_raw_a);
  step(prior.vbem_raw_b);

  Rng r_after(303);
  auto after = estimate(r_after);
  CHECK(after.mean <= before.mean + 3.0 * std::sqrt(before.se * before.se + after.se * after.se));
}

TEST_SUITE_END();
