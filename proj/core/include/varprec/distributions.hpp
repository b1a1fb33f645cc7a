#pragma once

#include <span>
#include <vector>

#include "varprec/rng.hpp"
#include "varprec/tensor.hpp"

namespace varprec::dists {

// ---- graph-side densities (training objectives) ---------------------------

// elementwise 0.5 * (log lam - log 2pi - lam (y - mu)^2); callers sum dims
nd::Tensor normal_log_prob(const nd::Tensor& y, const nd::Tensor& mu, const nd::Tensor& precision);

// elementwise Gamma(rate convention) log density at lam
nd::Tensor gamma_log_prob(const nd::Tensor& lam, const nd::Tensor& alpha, const nd::Tensor& beta);

// H[Gam(a, b)] = a - log b + lgamma(a) + (1 - a) psi(a)
nd::Tensor gamma_entropy(const nd::Tensor& alpha, const nd::Tensor& beta);

// KL(Gam(a1,b1) || Gam(a2,b2)), elementwise, rate convention
nd::Tensor gamma_kl(const nd::Tensor& a1, const nd::Tensor& b1, const nd::Tensor& a2,
                    const nd::Tensor& b2);

// One Gamma(alpha, beta) draw per element with implicit-reparameterization
// gradients: dz/dtheta = -(dF/dtheta)/(dF/dz), dF/dalpha by central finite
// difference of the regularized incomplete gamma, dF/dbeta analytic (-z/beta).
nd::Tensor gamma_sample(const nd::Tensor& alpha, const nd::Tensor& beta, Rng& rng);

// n independent draws stacked on a new leading axis; n = 0 gives an empty tensor
nd::Tensor gamma_sample_n(const nd::Tensor& alpha, const nd::Tensor& beta, std::int64_t n, Rng& rng);

// location-scale Student-t log density, elementwise
nd::Tensor student_t_log_prob(const nd::Tensor& y, const nd::Tensor& nu, const nd::Tensor& loc,
                              const nd::Tensor& scale);

// ---- evaluation-side predictive distributions -----------------------------

// Scalar component of a posterior predictive: Normal or Student-t.
struct Component {
  enum class Family { Normal, StudentT };
  Family family;
  double a, b, c;  // Normal: mean, variance, unused; StudentT: loc, scale, nu

  double log_pdf(double y) const;
  double mean() const;
  double variance() const;  // throws if undefined (Student-t nu <= 2)
  double sample(Rng& rng) const;
};

Component normal_component(double mean, double variance);
Component student_t_component(double nu, double loc, double scale);

// Weighted mixture of S components, each a product density over D dims.
// Regression predictives are the S = 1 case; VAE predictives use uniform
// weights with one component per latent sample.
struct PredictiveDist {
  std::vector<double> weights;                     // size S
  std::vector<std::vector<Component>> components;  // S x D

  std::int64_t dims() const { return components.empty() ? 0 : static_cast<std::int64_t>(components[0].size()); }
  std::int64_t component_count() const { return static_cast<std::int64_t>(weights.size()); }
  void validate() const;

  double log_prob(std::span<const double> y) const;
  std::vector<double> mean() const;
  std::vector<double> variance() const;
  std::vector<double> sample(Rng& rng) const;
};

PredictiveDist single_component(std::vector<Component> dims);
PredictiveDist uniform_mixture(std::vector<std::vector<Component>> components);

double mixture_log_prob(const PredictiveDist& m, std::span<const double> y);
std::vector<double> mixture_mean(const PredictiveDist& m);
std::vector<double> mixture_variance(const PredictiveDist& m);
std::vector<double> mixture_sample(const PredictiveDist& m, Rng& rng);

}  // namespace varprec::dists
