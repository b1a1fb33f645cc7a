#pragma once

#include <functional>
#include <string>
#include <utility>

#include "varprec/distributions.hpp"
#include "varprec/optimizer.hpp"
#include "varprec/rng.hpp"
#include "varprec/tensor.hpp"

namespace varprec::priors {

// Precision priors over the Gamma variational posterior q(lam | alpha, beta):
//   Vap       per-datum prior equal to q itself; the KL penalty vanishes
//   Standard  fixed Gamma(a, b), analytic KL
//   Vamp      uniform mixture of q evaluated at K pseudo-inputs
//   XVamp     Vamp with covariate-dependent mixture weights
//   Vbem      mixture of fixed Gamma components with learned weights
//   *Star     trainable pseudo-inputs / component parameters
enum class Kind { Vap, Standard, Vamp, VampStar, XVamp, XVampStar, Vbem, VbemStar };

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

bool is_heteroscedastic(Kind k);   // needs a mixture-weight head pi(x)
bool needs_pseudo_inputs(Kind k);  // VAMP family
bool is_trainable(Kind k);         // starred kinds

struct PriorConfig {
  double a = 1.0;
  double b = 1e-3;
  int k = 100;          // pseudo-inputs / trainable components
  int mc_samples = 1;   // per-datum draws for the mixture cross term
  // pseudo-input initialization: training rows by default, otherwise a
  // uniform box over the covariate range or a standard normal (latent space)
  bool init_from_range = false;
  double range_lo = 0.0, range_hi = 1.0;
  bool init_standard_normal = false;
};

struct PriorSpec {
  Kind kind = Kind::Vap;
  double a = 1.0, b = 1e-3;
  int k = 0;
  int mc_samples = 1;
  nd::Tensor pseudo_inputs;          // (K, d_in), VAMP family
  nd::Tensor vbem_raw_a, vbem_raw_b; // (K), softplus domain, VBEM*
  nd::Tensor vbem_a, vbem_b;         // (K), fixed grid, VBEM
  bool trainable = false;

  // adds the trainable pieces (if any) to the model's single optimizer store
  void register_params(nd::ParamStore& store);
};

// VBEM fixed component parameters: the Cartesian square of the grid scalars.
const std::vector<double>& vbem_grid_values();

PriorSpec init_prior(Kind kind, const PriorConfig& cfg, const nd::Tensor& train_inputs, Rng& rng);

// Head evaluations supplied by the owning model.
struct HeadFns {
  // inputs (m, d_in) -> (alpha, beta), each (m, d_out)
  std::function<std::pair<nd::Tensor, nd::Tensor>(const nd::Tensor&)> alpha_beta;
  // conditioning batch (n, d_in) -> mixture logits (n, K)
  std::function<nd::Tensor(const nd::Tensor&)> mixture_logits;
};

// Per-datum KL(q(lam|.) || p(lam)) for a batch: q_alpha/q_beta are (n, d_out),
// `conditioning` is the covariate (or latent) batch the heteroscedastic
// mixture weights condition on. Analytic for Vap/Standard; mixture kinds use
// -H[q] - E_q[log sum_j pi_j comp_j(lam)] with the expectation estimated by
// `mc_samples` pathwise draws and the log-sum-exp trick.
nd::Tensor kl_term(const PriorSpec& prior, const nd::Tensor& q_alpha, const nd::Tensor& q_beta,
                   const HeadFns& heads, const nd::Tensor& conditioning, Rng& rng);

}  // namespace varprec::priors
