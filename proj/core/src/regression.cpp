#include "varprec/regression.hpp"

#include <cmath>
#include <stdexcept>

#include "varprec/special.hpp"

namespace varprec::regress {

using nd::Tensor;

Kind kind_from_string(const std::string& s) {
  if (s == "normal") return Kind::Normal;
  if (s == "student") return Kind::Student;
  if (s == "gamma_normal") return Kind::GammaNormal;
  throw std::invalid_argument("unknown regression model kind '" + s + "'");
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::Normal: return "normal";
    case Kind::Student: return "student";
    case Kind::GammaNormal: return "gamma_normal";
  }
  return "normal";
}

Model::Model(Kind kind, const Config& cfg, priors::PriorSpec prior, Rng& rng)
    : kind_(kind), cfg_(cfg), prior_(std::move(prior)) {
  if (kind_ != Kind::GammaNormal && prior_.kind != priors::Kind::Vap)
    throw std::invalid_argument("regression: only the gamma_normal kind takes a precision prior");
  has_pi_ = kind_ == Kind::GammaNormal && priors::is_heteroscedastic(prior_.kind);

  const int head_slots = (kind_ == Kind::Normal) ? 2 : (has_pi_ ? 4 : 3);
  const int trunk_count = cfg_.shared_trunk ? 1 : head_slots;
  for (int t = 0; t < trunk_count; ++t)
    trunks_.emplace_back(store_, "trunk" + std::to_string(t), cfg_.in_dim, cfg_.hidden_units, rng);

  mu_head_ = nn::Dense(store_, "head.mu", cfg_.hidden_units, cfg_.out_dim, rng);
  if (kind_ == Kind::Normal) {
    s2_head_ = nn::Dense(store_, "head.sigma2", cfg_.hidden_units, cfg_.out_dim, rng);
  } else {
    a_head_ = nn::Dense(store_, "head.alpha", cfg_.hidden_units, cfg_.out_dim, rng);
    b_head_ = nn::Dense(store_, "head.beta", cfg_.hidden_units, cfg_.out_dim, rng);
  }
  if (has_pi_) pi_head_ = nn::Dense(store_, "head.pi", cfg_.hidden_units, prior_.k, rng);
  prior_.register_params(store_);
}

Tensor Model::hidden(const Tensor& x, int head_slot) const {
  const auto& trunk = cfg_.shared_trunk ? trunks_[0] : trunks_[static_cast<std::size_t>(head_slot)];
  return nn::activate(trunk(x), cfg_.activation);
}

Tensor Model::mu(const Tensor& x) const { return mu_head_(hidden(x, 0)); }

Tensor Model::sigma2(const Tensor& x) const {
  if (kind_ != Kind::Normal) throw std::invalid_argument("sigma2 head exists only on the normal kind");
  return nd::softplus(s2_head_(hidden(x, 1)));
}

std::pair<Tensor, Tensor> Model::alpha_beta(const Tensor& x) const {
  if (kind_ == Kind::Normal)
    throw std::invalid_argument("alpha/beta heads exist only on student and gamma_normal kinds");
  // alpha's softplus is offset by 1 so the predictive variance beta/(alpha-1) exists
  Tensor alpha = nd::softplus(a_head_(hidden(x, 1))) + 1.0;
  Tensor beta = nd::softplus(b_head_(hidden(x, 2)));
  return {alpha, beta};
}

Tensor Model::mixture_logits(const Tensor& x) const {
  if (!has_pi_) throw std::invalid_argument("this model has no mixture-weight head");
  return pi_head_(hidden(x, 3));
}

priors::HeadFns Model::head_fns() const {
  priors::HeadFns h;
  h.alpha_beta = [this](const Tensor& u) { return alpha_beta(u); };
  if (has_pi_) h.mixture_logits = [this](const Tensor& x) { return mixture_logits(x); };
  return h;
}

Tensor expected_log_likelihood(const Tensor& y, const Tensor& mu, const Tensor& alpha,
                               const Tensor& beta) {
  Tensor per_dim = 0.5 * (nd::digamma(alpha) - nd::log(beta) - special::kLog2Pi -
                          alpha / beta * nd::square(y - mu));
  return nd::sum_last(per_dim);
}

Tensor elbo(const Model& m, const Tensor& x, const Tensor& y, Rng& rng) {
  if (m.kind() != Kind::GammaNormal)
    throw std::invalid_argument("elbo: model kind must be gamma_normal");
  if (x.dim(0) == 0) throw std::invalid_argument("elbo: empty batch");
  auto [alpha, beta] = m.alpha_beta(x);
  Tensor ell = expected_log_likelihood(y, m.mu(x), alpha, beta);
  Tensor kl = priors::kl_term(m.prior(), alpha, beta, m.head_fns(), x, rng);
  return nd::sum(ell - kl);
}

Tensor nll_normal(const Model& m, const Tensor& x, const Tensor& y) {
  if (m.kind() != Kind::Normal) throw std::invalid_argument("nll_normal: model kind must be normal");
  Tensor prec = 1.0 / m.sigma2(x);
  return nd::neg(nd::sum(nd::sum_last(dists::normal_log_prob(y, m.mu(x), prec))));
}

Tensor nll_student(const Model& m, const Tensor& x, const Tensor& y) {
  if (m.kind() != Kind::Student) throw std::invalid_argument("nll_student: model kind must be student");
  auto [alpha, beta] = m.alpha_beta(x);
  Tensor lp = dists::student_t_log_prob(y, 2.0 * alpha, m.mu(x), nd::sqrt(beta / alpha));
  return nd::neg(nd::sum(nd::sum_last(lp)));
}

Tensor Model::loss(const Tensor& x, const Tensor& y, Rng& rng) const {
  const double n = static_cast<double>(x.dim(0));
  switch (kind_) {
    case Kind::Normal: return nll_normal(*this, x, y) / n;
    case Kind::Student: return nll_student(*this, x, y) / n;
    case Kind::GammaNormal: return nd::neg(elbo(*this, x, y, rng)) / n;
  }
  throw std::logic_error("unreachable");
}

std::vector<dists::PredictiveDist> Model::posterior_predictive(const harness::Matrix& x) const {
  Tensor xt = x.tensor();
  std::vector<dists::PredictiveDist> out;
  out.reserve(static_cast<std::size_t>(x.rows));
  const std::int64_t d = cfg_.out_dim;
  if (kind_ == Kind::Normal) {
    Tensor m = mu(xt), s2 = sigma2(xt);
    for (std::int64_t r = 0; r < x.rows; ++r) {
      std::vector<dists::Component> comps;
      comps.reserve(static_cast<std::size_t>(d));
      for (std::int64_t j = 0; j < d; ++j)
        comps.push_back(dists::normal_component(m.at(r * d + j), s2.at(r * d + j)));
      out.push_back(dists::single_component(std::move(comps)));
    }
    return out;
  }
  Tensor m = mu(xt);
  auto [alpha, beta] = alpha_beta(xt);
  for (std::int64_t r = 0; r < x.rows; ++r) {
    std::vector<dists::Component> comps;
    comps.reserve(static_cast<std::size_t>(d));
    for (std::int64_t j = 0; j < d; ++j) {
      const double a = alpha.at(r * d + j), b = beta.at(r * d + j);
      comps.push_back(dists::student_t_component(2.0 * a, m.at(r * d + j), std::sqrt(b / a)));
    }
    out.push_back(dists::single_component(std::move(comps)));
  }
  return out;
}

double Model::mean_log_predictive(const harness::Matrix& x, const harness::Matrix& y) const {
  if (x.rows != y.rows) throw std::invalid_argument("mean_log_predictive: row count mismatch");
  const auto preds = posterior_predictive(x);
  double acc = 0.0;
  for (std::int64_t r = 0; r < x.rows; ++r) acc += preds[static_cast<std::size_t>(r)].log_prob(y.row(r));
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

training::TrainHistory train(Model& model, const harness::Dataset& data,
                             const training::TrainConfig& cfg, Rng& rng) {
  const harness::Matrix x_train = data.x_train();
  const harness::Matrix y_train = data.y_train();
  const harness::Matrix x_val = data.x_val();
  const harness::Matrix y_val = data.y_val();

  training::StepFn step = [&](std::span<const std::int64_t> rows, Rng& r) {
    return model.loss(rows_tensor(x_train, rows), rows_tensor(y_train, rows), r);
  };
  training::ValFn validate;
  if (x_val.rows > 0)
    validate = [&](Rng&) { return model.mean_log_predictive(x_val, y_val); };
  return training::fit(model.params(), x_train.rows, cfg, step, validate, rng);
}

}  // namespace varprec::regress
