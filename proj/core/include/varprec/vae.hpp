#pragma once

#include <string>
#include <utility>
#include <vector>

#include "varprec/dataset.hpp"
#include "varprec/distributions.hpp"
#include "varprec/nn.hpp"
#include "varprec/priors.hpp"
#include "varprec/training.hpp"

namespace varprec::vae {

// FixedVariance:        Gaussian decoder with a constant variance
// SharedVariance:       mean/variance heads bifurcated from one decoder
// SplitVariance:        separate mean and variance decoder networks
// StudentLikelihood:    Student-t decoder (three separate networks)
// MapPrecision:         point-estimated precision with a Gamma prior term
// VariationalPrecision: Gamma variational posterior q(lam|z) over the
//                       decoder precision, with a precision prior
enum class Kind {
  FixedVariance,
  SharedVariance,
  SplitVariance,
  StudentLikelihood,
  MapPrecision,
  VariationalPrecision
};

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

struct Config {
  int data_dim = 256;
  std::vector<int> encoder_hidden = {128, 64};  // decoder mirrors this in reverse
  int latent_dim = 8;
  nn::Act activation = nn::Act::Elu;
  bool batch_norm = false;
  double fixed_variance = 1.0;            // FixedVariance
  double prior_a = 1.0, prior_b = 1e-3;   // MapPrecision
  int predictive_samples = 20;
  bool shared_decoder_trunk = true;       // VariationalPrecision heads
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

  // q(z|x) = N(mu_z(x), sigma_z^2(x)), diagonal
  std::pair<nd::Tensor, nd::Tensor> encode(const nd::Tensor& x, bool training) const;

  nd::Tensor decode_mean(const nd::Tensor& z, bool training) const;
  nd::Tensor decode_sigma2(const nd::Tensor& z, bool training) const;     // Shared/Split
  nd::Tensor decode_precision(const nd::Tensor& z, bool training) const;  // Student/Map
  nd::Tensor decode_nu(const nd::Tensor& z, bool training) const;         // Student, > 3
  std::pair<nd::Tensor, nd::Tensor> decode_alpha_beta(const nd::Tensor& z, bool training) const;
  nd::Tensor mixture_logits(const nd::Tensor& z, bool training) const;
  priors::HeadFns head_fns(bool training) const;

  // objective to minimize: -ELBO / batch size
  nd::Tensor loss(const nd::Tensor& x, Rng& rng, bool training = true) const;

  // uniform mixture over S latent draws; components by kind
  std::vector<dists::PredictiveDist> posterior_predictive(const harness::Matrix& x, int s_samples,
                                                          Rng& rng) const;
  // mean over rows of log p(x*|x) at replicated inputs
  double mean_log_predictive(const harness::Matrix& x, int s_samples, Rng& rng) const;

 private:
  nd::Tensor decoder_hidden(const nd::Tensor& z, int head_slot, bool training) const;

  Kind kind_;
  Config cfg_;
  nd::ParamStore store_;
  priors::PriorSpec prior_;
  nn::Mlp encoder_;
  nn::Dense enc_mu_, enc_s2_;
  std::vector<nn::Mlp> decoders_;
  nn::Dense dec_mean_, dec_s2_, dec_prec_, dec_nu_, dec_alpha_, dec_beta_, dec_pi_;
  bool has_pi_ = false;
};

// batch-summed ELBOs; `training` toggles batch-norm mode
nd::Tensor elbo_vae(const Model& m, const nd::Tensor& x, Rng& rng, bool training = true);
nd::Tensor elbo_student_vae(const Model& m, const nd::Tensor& x, Rng& rng, bool training = true);
// VariationalPrecision and MapPrecision kinds
nd::Tensor elbo_v3ae(const Model& m, const nd::Tensor& x, Rng& rng, bool training = true);

training::TrainHistory train_vae(Model& model, const harness::Dataset& data,
                                 const training::TrainConfig& cfg, Rng& rng);

}  // namespace varprec::vae
