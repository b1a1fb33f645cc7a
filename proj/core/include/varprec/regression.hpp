#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "varprec/dataset.hpp"
#include "varprec/distributions.hpp"
#include "varprec/nn.hpp"
#include "varprec/priors.hpp"
#include "varprec/training.hpp"

namespace varprec::regress {

// Normal:      y ~ N(mu(x), sigma^2(x)), fit by maximum likelihood
// Student:     y ~ t parameterized through Gamma-Normal heads alpha/beta
// GammaNormal: precision treated variationally with q(lam|x) = Gam(alpha(x), beta(x))
enum class Kind { Normal, Student, GammaNormal };

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

struct Config {
  int in_dim = 1;
  int out_dim = 1;
  int hidden_units = 50;
  nn::Act activation = nn::Act::Elu;
  bool shared_trunk = true;  // heads share the hidden layer
};

class Model {
 public:
  Model(Kind kind, const Config& cfg, priors::PriorSpec prior, Rng& rng);

  Kind kind() const { return kind_; }
  const Config& config() const { return cfg_; }
  nd::ParamStore& params() { return store_; }
  const nd::ParamStore& params() const { return store_; }
  priors::PriorSpec& prior() { return prior_; }
  const priors::PriorSpec& prior() const { return prior_; }

  // graph heads over a whitened covariate batch (n, in_dim)
  nd::Tensor mu(const nd::Tensor& x) const;
  nd::Tensor sigma2(const nd::Tensor& x) const;  // Normal kind only
  std::pair<nd::Tensor, nd::Tensor> alpha_beta(const nd::Tensor& x) const;  // alpha > 1, beta > 0
  nd::Tensor mixture_logits(const nd::Tensor& x) const;  // (n, K), heteroscedastic priors
  priors::HeadFns head_fns() const;

  // objective to minimize: mean per-datum negative objective of the kind
  nd::Tensor loss(const nd::Tensor& x, const nd::Tensor& y, Rng& rng) const;

  // one predictive per row: Normal(mu, sigma^2) or Student-t(2 alpha, mu, sqrt(beta/alpha))
  std::vector<dists::PredictiveDist> posterior_predictive(const harness::Matrix& x) const;
  // validation metric: mean log predictive density (whitened space)
  double mean_log_predictive(const harness::Matrix& x, const harness::Matrix& y) const;

 private:
  nd::Tensor hidden(const nd::Tensor& x, int head_slot) const;

  Kind kind_;
  Config cfg_;
  nd::ParamStore store_;
  priors::PriorSpec prior_;
  std::vector<nn::Dense> trunks_;  // one shared, or one per head
  nn::Dense mu_head_, s2_head_, a_head_, b_head_, pi_head_;
  bool has_pi_ = false;
};

// analytic E_{lam ~ Gam(alpha, beta)}[log N(y | mu, lam)], summed over target
// dims: one value per datum
nd::Tensor expected_log_likelihood(const nd::Tensor& y, const nd::Tensor& mu,
                                   const nd::Tensor& alpha, const nd::Tensor& beta);

// batch-summed objectives
nd::Tensor elbo(const Model& m, const nd::Tensor& x, const nd::Tensor& y, Rng& rng);
nd::Tensor nll_normal(const Model& m, const nd::Tensor& x, const nd::Tensor& y);
nd::Tensor nll_student(const Model& m, const nd::Tensor& x, const nd::Tensor& y);

training::TrainHistory train(Model& model, const harness::Dataset& data,
                             const training::TrainConfig& cfg, Rng& rng);

}  // namespace varprec::regress
