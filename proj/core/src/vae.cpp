#include "varprec/vae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "varprec/regression.hpp"
#include "varprec/special.hpp"

namespace varprec::vae {

using nd::Tensor;

Kind kind_from_string(const std::string& s) {
  if (s == "fixed") return Kind::FixedVariance;
  if (s == "vae") return Kind::SharedVariance;
  if (s == "vae_split") return Kind::SplitVariance;
  if (s == "student") return Kind::StudentLikelihood;
  if (s == "map") return Kind::MapPrecision;
  if (s == "v3ae") return Kind::VariationalPrecision;
  throw std::invalid_argument("unknown vae model kind '" + s + "'");
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::FixedVariance: return "fixed";
    case Kind::SharedVariance: return "vae";
    case Kind::SplitVariance: return "vae_split";
    case Kind::StudentLikelihood: return "student";
    case Kind::MapPrecision: return "map";
    case Kind::VariationalPrecision: return "v3ae";
  }
  return "vae";
}

namespace {

// decoder head slots: 0 = mean, 1 = variance-ish, 2 = extra (nu / beta), 3 = pi
int trunk_count(Kind kind, const Config& cfg, bool has_pi) {
  switch (kind) {
    case Kind::FixedVariance: return 1;
    case Kind::SharedVariance: return 1;
    case Kind::SplitVariance: return 2;
    case Kind::StudentLikelihood: return 3;  // separate networks per head
    case Kind::MapPrecision: return 1;
    case Kind::VariationalPrecision: return cfg.shared_decoder_trunk ? 1 : (has_pi ? 4 : 3);
  }
  return 1;
}

}  // namespace

Model::Model(Kind kind, const Config& cfg, priors::PriorSpec prior, Rng& rng)
    : kind_(kind), cfg_(cfg), prior_(std::move(prior)) {
  if (kind_ != Kind::VariationalPrecision && prior_.kind != priors::Kind::Vap)
    throw std::invalid_argument("vae: only the v3ae kind takes a precision prior");
  has_pi_ = kind_ == Kind::VariationalPrecision && priors::is_heteroscedastic(prior_.kind);
  if (cfg_.data_dim < 1 || cfg_.latent_dim < 1)
    throw std::invalid_argument("vae: data and latent dims must be positive");

  encoder_ = nn::Mlp(store_, "enc", cfg_.data_dim, cfg_.encoder_hidden, cfg_.activation,
                     cfg_.batch_norm, rng);
  enc_mu_ = nn::Dense(store_, "enc.mu", encoder_.out_dim, cfg_.latent_dim, rng);
  enc_s2_ = nn::Dense(store_, "enc.sigma2", encoder_.out_dim, cfg_.latent_dim, rng);

  std::vector<int> dec_hidden(cfg_.encoder_hidden.rbegin(), cfg_.encoder_hidden.rend());
  const int trunks = trunk_count(kind_, cfg_, has_pi_);
  for (int t = 0; t < trunks; ++t)
    decoders_.emplace_back(store_, "dec" + std::to_string(t), cfg_.latent_dim, dec_hidden,
                           cfg_.activation, cfg_.batch_norm, rng);
  const int h = decoders_[0].out_dim;

  dec_mean_ = nn::Dense(store_, "dec.mean", h, cfg_.data_dim, rng);
  switch (kind_) {
    case Kind::FixedVariance:
      if (!(cfg_.fixed_variance > 0.0))
        throw std::invalid_argument("vae: fixed variance must be positive");
      break;
    case Kind::SharedVariance:
    case Kind::SplitVariance:
      dec_s2_ = nn::Dense(store_, "dec.sigma2", h, cfg_.data_dim, rng);
      break;
    case Kind::StudentLikelihood:
      dec_prec_ = nn::Dense(store_, "dec.precision", h, cfg_.data_dim, rng);
      dec_nu_ = nn::Dense(store_, "dec.nu", h, cfg_.data_dim, rng);
      break;
    case Kind::MapPrecision:
      dec_prec_ = nn::Dense(store_, "dec.precision", h, cfg_.data_dim, rng);
      break;
    case Kind::VariationalPrecision:
      dec_alpha_ = nn::Dense(store_, "dec.alpha", h, cfg_.data_dim, rng);
      dec_beta_ = nn::Dense(store_, "dec.beta", h, cfg_.data_dim, rng);
      if (has_pi_) dec_pi_ = nn::Dense(store_, "dec.pi", h, prior_.k, rng);
      break;
  }
  prior_.register_params(store_);
}

std::pair<Tensor, Tensor> Model::encode(const Tensor& x, bool training) const {
  Tensor h = encoder_(x, training);
  return {enc_mu_(h), nd::softplus(enc_s2_(h))};
}

Tensor Model::decoder_hidden(const Tensor& z, int head_slot, bool training) const {
  const int idx = decoders_.size() == 1 ? 0 : std::min<int>(head_slot, static_cast<int>(decoders_.size()) - 1);
  return decoders_[static_cast<std::size_t>(idx)](z, training);
}

Tensor Model::decode_mean(const Tensor& z, bool training) const {
  return dec_mean_(decoder_hidden(z, 0, training));
}

Tensor Model::decode_sigma2(const Tensor& z, bool training) const {
  if (kind_ != Kind::SharedVariance && kind_ != Kind::SplitVariance)
    throw std::invalid_argument("decode_sigma2: wrong model kind");
  return nd::softplus(dec_s2_(decoder_hidden(z, 1, training)));
}

Tensor Model::decode_precision(const Tensor& z, bool training) const {
  if (kind_ != Kind::StudentLikelihood && kind_ != Kind::MapPrecision)
    throw std::invalid_argument("decode_precision: wrong model kind");
  return nd::softplus(dec_prec_(decoder_hidden(z, 1, training)));
}

Tensor Model::decode_nu(const Tensor& z, bool training) const {
  if (kind_ != Kind::StudentLikelihood) throw std::invalid_argument("decode_nu: wrong model kind");
  // variance exists and stays bounded only for nu > 3
  return nd::softplus(dec_nu_(decoder_hidden(z, 2, training))) + 3.0;
}

std::pair<Tensor, Tensor> Model::decode_alpha_beta(const Tensor& z, bool training) const {
  if (kind_ != Kind::VariationalPrecision)
    throw std::invalid_argument("decode_alpha_beta: wrong model kind");
  Tensor alpha = nd::softplus(dec_alpha_(decoder_hidden(z, 1, training))) + 1.0;
  Tensor beta = nd::softplus(dec_beta_(decoder_hidden(z, 2, training)));
  return {alpha, beta};
}

Tensor Model::mixture_logits(const Tensor& z, bool training) const {
  if (!has_pi_) throw std::invalid_argument("this model has no mixture-weight head");
  return dec_pi_(decoder_hidden(z, 3, training));
}

priors::HeadFns Model::head_fns(bool training) const {
  priors::HeadFns h;
  h.alpha_beta = [this, training](const Tensor& u) { return decode_alpha_beta(u, training); };
  if (has_pi_) h.mixture_logits = [this, training](const Tensor& z) { return mixture_logits(z, training); };
  return h;
}

namespace {

Tensor sample_latent(const std::pair<Tensor, Tensor>& enc, Rng& rng) {
  const auto& [mu, s2] = enc;
  std::vector<double> eps(static_cast<std::size_t>(mu.size()));
  for (auto& v : eps) v = rng.normal();
  return mu + nd::sqrt(s2) * Tensor::from(mu.shape(), std::move(eps));
}

// KL(N(mu, s2) || N(0, I)) per datum
Tensor latent_kl(const std::pair<Tensor, Tensor>& enc) {
  const auto& [mu, s2] = enc;
  return 0.5 * nd::sum_last(nd::square(mu) + s2 - nd::log(s2) - 1.0);
}

}  // namespace

Tensor elbo_vae(const Model& m, const Tensor& x, Rng& rng, bool training) {
  if (m.kind() != Kind::FixedVariance && m.kind() != Kind::SharedVariance &&
      m.kind() != Kind::SplitVariance)
    throw std::invalid_argument("elbo_vae: wrong model kind");
  auto enc = m.encode(x, training);
  Tensor z = sample_latent(enc, rng);
  Tensor mean = m.decode_mean(z, training);
  Tensor recon;
  if (m.kind() == Kind::FixedVariance) {
    Tensor prec = Tensor::scalar(1.0 / m.config().fixed_variance);
    recon = nd::sum_last(dists::normal_log_prob(x, mean, prec));
  } else {
    Tensor prec = 1.0 / m.decode_sigma2(z, training);
    recon = nd::sum_last(dists::normal_log_prob(x, mean, prec));
  }
  return nd::sum(recon - latent_kl(enc));
}

Tensor elbo_student_vae(const Model& m, const Tensor& x, Rng& rng, bool training) {
  if (m.kind() != Kind::StudentLikelihood)
    throw std::invalid_argument("elbo_student_vae: wrong model kind");
  auto enc = m.encode(x, training);
  Tensor z = sample_latent(enc, rng);
  Tensor mean = m.decode_mean(z, training);
  Tensor lam = m.decode_precision(z, training);
  Tensor nu = m.decode_nu(z, training);
  Tensor recon = nd::sum_last(dists::student_t_log_prob(x, nu, mean, 1.0 / nd::sqrt(lam)));
  return nd::sum(recon - latent_kl(enc));
}

Tensor elbo_v3ae(const Model& m, const Tensor& x, Rng& rng, bool training) {
  if (m.kind() != Kind::VariationalPrecision && m.kind() != Kind::MapPrecision)
    throw std::invalid_argument("elbo_v3ae: wrong model kind");
  auto enc = m.encode(x, training);
  Tensor z = sample_latent(enc, rng);
  Tensor mean = m.decode_mean(z, training);
  Tensor inner;
  if (m.kind() == Kind::MapPrecision) {
    Tensor lam = m.decode_precision(z, training);
    Tensor a = Tensor::scalar(m.config().prior_a);
    Tensor b = Tensor::scalar(m.config().prior_b);
    inner = nd::sum_last(dists::normal_log_prob(x, mean, lam) + dists::gamma_log_prob(lam, a, b));
  } else {
    auto [alpha, beta] = m.decode_alpha_beta(z, training);
    Tensor ell = regress::expected_log_likelihood(x, mean, alpha, beta);
    Tensor kl_lam = priors::kl_term(m.prior(), alpha, beta, m.head_fns(training), z, rng);
    inner = ell - kl_lam;
  }
  return nd::sum(inner - latent_kl(enc));
}

Tensor Model::loss(const Tensor& x, Rng& rng, bool training) const {
  const double n = static_cast<double>(x.dim(0));
  switch (kind_) {
    case Kind::FixedVariance:
    case Kind::SharedVariance:
    case Kind::SplitVariance:
      return nd::neg(elbo_vae(*this, x, rng, training)) / n;
    case Kind::StudentLikelihood:
      return nd::neg(elbo_student_vae(*this, x, rng, training)) / n;
    case Kind::MapPrecision:
    case Kind::VariationalPrecision:
      return nd::neg(elbo_v3ae(*this, x, rng, training)) / n;
  }
  throw std::logic_error("unreachable");
}

std::vector<dists::PredictiveDist> Model::posterior_predictive(const harness::Matrix& x,
                                                               int s_samples, Rng& rng) const {
  if (s_samples < 1) throw std::invalid_argument("posterior_predictive: need at least one sample");
  const std::int64_t n = x.rows;
  const std::int64_t d = cfg_.data_dim;
  if (x.cols != d) throw std::invalid_argument("posterior_predictive: pixel dim mismatch");
  Tensor xt = x.tensor();
  auto enc = encode(xt, /*training=*/false);

  std::vector<std::vector<std::vector<dists::Component>>> comps(
      static_cast<std::size_t>(n));  // per datum: S x D
  for (auto& c : comps) c.reserve(static_cast<std::size_t>(s_samples));

  for (int s = 0; s < s_samples; ++s) {
    Tensor z = sample_latent(enc, rng);
    Tensor mean = decode_mean(z, false);
    Tensor s2, lam, nu, alpha, beta;
    switch (kind_) {
      case Kind::FixedVariance: break;
      case Kind::SharedVariance:
      case Kind::SplitVariance: s2 = decode_sigma2(z, false); break;
      case Kind::StudentLikelihood:
        lam = decode_precision(z, false);
        nu = decode_nu(z, false);
        break;
      case Kind::MapPrecision: lam = decode_precision(z, false); break;
      case Kind::VariationalPrecision: {
        auto ab = decode_alpha_beta(z, false);
        alpha = ab.first;
        beta = ab.second;
        break;
      }
    }
    for (std::int64_t i = 0; i < n; ++i) {
      std::vector<dists::Component> dims;
      dims.reserve(static_cast<std::size_t>(d));
      for (std::int64_t j = 0; j < d; ++j) {
        const std::int64_t idx = i * d + j;
        switch (kind_) {
          case Kind::FixedVariance:
            dims.push_back(dists::normal_component(mean.at(idx), cfg_.fixed_variance));
            break;
          case Kind::SharedVariance:
          case Kind::SplitVariance:
            dims.push_back(dists::normal_component(mean.at(idx), s2.at(idx)));
            break;
          case Kind::StudentLikelihood:
            dims.push_back(dists::student_t_component(nu.at(idx), mean.at(idx),
                                                      1.0 / std::sqrt(lam.at(idx))));
            break;
          case Kind::MapPrecision:
            dims.push_back(dists::normal_component(mean.at(idx), 1.0 / lam.at(idx)));
            break;
          case Kind::VariationalPrecision: {
            const double a = alpha.at(idx), b = beta.at(idx);
            dims.push_back(
                dists::student_t_component(2.0 * a, mean.at(idx), std::sqrt(b / a)));
            break;
          }
        }
      }
      comps[static_cast<std::size_t>(i)].push_back(std::move(dims));
    }
  }

  std::vector<dists::PredictiveDist> out;
  out.reserve(static_cast<std::size_t>(n));
  for (auto& c : comps) out.push_back(dists::uniform_mixture(std::move(c)));
  return out;
}

double Model::mean_log_predictive(const harness::Matrix& x, int s_samples, Rng& rng) const {
  const auto preds = posterior_predictive(x, s_samples, rng);
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.rows; ++i) acc += preds[static_cast<std::size_t>(i)].log_prob(x.row(i));
  return acc / static_cast<double>(x.rows);
}

namespace {

Tensor rows_tensor(const harness::Matrix& m, std::span<const std::int64_t> rows) {
  std::vector<double> data(rows.size() * static_cast<std::size_t>(m.cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(m.data.data() + rows[i] * m.cols, m.cols,
                data.data() + static_cast<std::int64_t>(i) * m.cols);
  return Tensor::from({static_cast<std::int64_t>(rows.size()), m.cols}, std::move(data));
}

}  // namespace

training::TrainHistory train_vae(Model& model, const harness::Dataset& data,
                                 const training::TrainConfig& cfg, Rng& rng) {
  const harness::Matrix x_train = data.x_train();
  const harness::Matrix x_val = data.x_val();
  training::StepFn step = [&](std::span<const std::int64_t> rows, Rng& r) {
    return model.loss(rows_tensor(x_train, rows), r, /*training=*/true);
  };
  training::ValFn validate;
  if (x_val.rows > 0)
    validate = [&](Rng& r) {
      return model.mean_log_predictive(x_val, model.config().predictive_samples, r);
    };
  return training::fit(model.params(), x_train.rows, cfg, step, validate, rng);
}

}  // namespace varprec::vae
