#include "varprec/priors.hpp"

#include <cmath>
#include <stdexcept>

#include "varprec/special.hpp"

namespace varprec::priors {

using nd::Tensor;

Kind kind_from_string(const std::string& s) {
  if (s == "vap") return Kind::Vap;
  if (s == "standard") return Kind::Standard;
  if (s == "vamp") return Kind::Vamp;
  if (s == "vamp_star" || s == "vamp*") return Kind::VampStar;
  if (s == "xvamp") return Kind::XVamp;
  if (s == "xvamp_star" || s == "xvamp*") return Kind::XVampStar;
  if (s == "vbem") return Kind::Vbem;
  if (s == "vbem_star" || s == "vbem*") return Kind::VbemStar;
  throw std::invalid_argument("unknown prior kind '" + s + "'");
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::Vap: return "vap";
    case Kind::Standard: return "standard";
    case Kind::Vamp: return "vamp";
    case Kind::VampStar: return "vamp_star";
    case Kind::XVamp: return "xvamp";
    case Kind::XVampStar: return "xvamp_star";
    case Kind::Vbem: return "vbem";
    case Kind::VbemStar: return "vbem_star";
  }
  return "vap";
}

bool is_heteroscedastic(Kind k) {
  return k == Kind::XVamp || k == Kind::XVampStar || k == Kind::Vbem || k == Kind::VbemStar;
}

bool needs_pseudo_inputs(Kind k) {
  return k == Kind::Vamp || k == Kind::VampStar || k == Kind::XVamp || k == Kind::XVampStar;
}

bool is_trainable(Kind k) {
  return k == Kind::VampStar || k == Kind::XVampStar || k == Kind::VbemStar;
}

const std::vector<double>& vbem_grid_values() {
  static const std::vector<double> grid = {0.05, 0.1, 0.25, 0.5, 0.75, 1.0,
                                           1.5,  2.0, 2.5,  3.0, 3.5,  4.0};
  return grid;
}

void PriorSpec::register_params(nd::ParamStore& store) {
  if (!trainable) return;
  if (needs_pseudo_inputs(kind)) store.add("prior.pseudo_inputs", pseudo_inputs);
  if (kind == Kind::VbemStar) {
    store.add("prior.raw_a", vbem_raw_a);
    store.add("prior.raw_b", vbem_raw_b);
  }
}

PriorSpec init_prior(Kind kind, const PriorConfig& cfg, const Tensor& train_inputs, Rng& rng) {
  PriorSpec spec;
  spec.kind = kind;
  spec.a = cfg.a;
  spec.b = cfg.b;
  spec.mc_samples = cfg.mc_samples;
  spec.trainable = is_trainable(kind);
  if (kind == Kind::Vap) return spec;
  if (kind == Kind::Standard) {
    if (!(cfg.a > 0.0) || !(cfg.b > 0.0))
      throw std::invalid_argument("init_prior: standard Gamma prior needs a, b > 0");
    return spec;
  }
  if (needs_pseudo_inputs(kind)) {
    if (!train_inputs.defined() || train_inputs.rank() != 2)
      throw std::invalid_argument("init_prior: VAMP-family priors need a (n, d) training-input matrix");
    const std::int64_t n = train_inputs.dim(0);
    const std::int64_t d = train_inputs.dim(1);
    const std::int64_t k = cfg.k;
    if (k < 1) throw std::invalid_argument("init_prior: pseudo-input count must be >= 1");
    std::vector<double> u(static_cast<std::size_t>(k * d));
    if (cfg.init_from_range) {
      for (auto& v : u) v = rng.uniform(cfg.range_lo, cfg.range_hi);
    } else if (cfg.init_standard_normal) {
      for (auto& v : u) v = rng.normal();
    } else {
      if (k > n)
        throw std::invalid_argument("init_prior: K = " + std::to_string(k) +
                                    " pseudo-inputs exceed the N = " + std::to_string(n) +
                                    " training rows available for without-replacement sampling");
      const auto rows = rng.sample_without_replacement(n, k);
      auto src = train_inputs.values();
      for (std::int64_t j = 0; j < k; ++j)
        for (std::int64_t c = 0; c < d; ++c)
          u[static_cast<std::size_t>(j * d + c)] = src[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)] * d + c)];
    }
    spec.k = static_cast<int>(k);
    spec.pseudo_inputs = spec.trainable ? Tensor::param({k, d}, std::move(u))
                                        : Tensor::from({k, d}, std::move(u));
    return spec;
  }
  if (kind == Kind::Vbem) {
    const auto& grid = vbem_grid_values();
    const std::int64_t k = static_cast<std::int64_t>(grid.size() * grid.size());
    std::vector<double> a(static_cast<std::size_t>(k)), b(static_cast<std::size_t>(k));
    std::size_t idx = 0;
    for (double av : grid)
      for (double bv : grid) {
        a[idx] = av;
        b[idx] = bv;
        ++idx;
      }
    spec.k = static_cast<int>(k);
    spec.vbem_a = Tensor::from({k}, std::move(a));
    spec.vbem_b = Tensor::from({k}, std::move(b));
    return spec;
  }
  // VbemStar: raw parameters drawn iid Uniform[-3, 3], softplus applied downstream
  const std::int64_t k = cfg.k;
  if (k < 1) throw std::invalid_argument("init_prior: component count must be >= 1");
  std::vector<double> ra(static_cast<std::size_t>(k)), rb(static_cast<std::size_t>(k));
  for (auto& v : ra) v = rng.uniform(-3.0, 3.0);
  for (auto& v : rb) v = rng.uniform(-3.0, 3.0);
  spec.k = static_cast<int>(k);
  spec.vbem_raw_a = Tensor::param({k}, std::move(ra));
  spec.vbem_raw_b = Tensor::param({k}, std::move(rb));
  return spec;
}

namespace {

constexpr double kLogFloor = -690.77552789821368;  // log(1e-300)

// mixture-weight log probabilities: constant -log K for VAMP kinds, otherwise
// log softmax of the model's pi-head logits
Tensor log_weights(const PriorSpec& prior, const HeadFns& heads, const Tensor& conditioning,
                   std::int64_t n) {
  if (!is_heteroscedastic(prior.kind))
    return Tensor::full({n, 1}, -std::log(static_cast<double>(prior.k)));
  if (!heads.mixture_logits)
    throw std::invalid_argument("kl_term: prior kind '" + kind_to_string(prior.kind) +
                                "' needs a mixture-weight head, none was provided");
  Tensor logits = heads.mixture_logits(conditioning);
  if (logits.rank() != 2 || logits.dim(0) != n || logits.dim(1) != prior.k)
    throw std::invalid_argument("kl_term: mixture logits shape " + nd::shape_str(logits.shape()) +
                                " does not match (n, K) = (" + std::to_string(n) + ", " +
                                std::to_string(prior.k) + ")");
  return logits - nd::reshape(nd::log_sum_exp(logits), {n, 1});
}

// (n, K) log densities of a sampled lam (n, d) under K Gamma components whose
// per-dimension parameters are (K, d)
Tensor component_log_probs_amortized(const Tensor& lam, const Tensor& comp_alpha,
                                     const Tensor& comp_beta) {
  Tensor per_comp = nd::sum_last(comp_alpha * nd::log(comp_beta) - nd::lgamma(comp_alpha));  // (K)
  const std::int64_t k = per_comp.dim(0);
  return nd::reshape(per_comp, {1, k}) + nd::matmul(nd::log(lam), nd::transpose(comp_alpha - 1.0)) -
         nd::matmul(lam, nd::transpose(comp_beta));
}

// (n, K) log densities when every dimension shares scalar component (a_j, b_j)
Tensor component_log_probs_shared(const Tensor& lam, const Tensor& a, const Tensor& b) {
  const std::int64_t n = lam.dim(0);
  const std::int64_t d = lam.dim(1);
  const std::int64_t k = a.dim(0);
  Tensor per_comp = (a * nd::log(b) - nd::lgamma(a)) * static_cast<double>(d);  // (K)
  Tensor sum_log = nd::reshape(nd::sum_last(nd::log(lam)), {n, 1});
  Tensor sum_lam = nd::reshape(nd::sum_last(lam), {n, 1});
  return nd::reshape(per_comp, {1, k}) + nd::matmul(sum_log, nd::reshape(a - 1.0, {1, k})) -
         nd::matmul(sum_lam, nd::reshape(b, {1, k}));
}

}  // namespace

Tensor kl_term(const PriorSpec& prior, const Tensor& q_alpha, const Tensor& q_beta,
               const HeadFns& heads, const Tensor& conditioning, Rng& rng) {
  if (q_alpha.rank() != 2 || q_beta.rank() != 2 || q_alpha.shape() != q_beta.shape())
    throw std::invalid_argument("kl_term: q parameters must share an (n, d) shape");
  const std::int64_t n = q_alpha.dim(0);

  if (prior.kind == Kind::Vap) return Tensor::zeros({n});

  if (prior.kind == Kind::Standard) {
    Tensor pa = Tensor::scalar(prior.a);
    Tensor pb = Tensor::scalar(prior.b);
    return nd::sum_last(dists::gamma_kl(q_alpha, q_beta, pa, pb));
  }

  if (needs_pseudo_inputs(prior.kind)) {
    if (!prior.pseudo_inputs.defined())
      throw std::invalid_argument("kl_term: prior pseudo-inputs are uninitialized");
    if (!heads.alpha_beta)
      throw std::invalid_argument("kl_term: VAMP-family priors need the amortized alpha/beta heads");
  }

  Tensor entropy = nd::sum_last(dists::gamma_entropy(q_alpha, q_beta));  // (n)
  Tensor lw = log_weights(prior, heads, conditioning, n);                // (n, K) or (n, 1)

  Tensor cross_acc;
  const int s_count = std::max(1, prior.mc_samples);
  for (int s = 0; s < s_count; ++s) {
    Tensor lam = dists::gamma_sample(q_alpha, q_beta, rng);  // (n, d)
    Tensor comp;
    switch (prior.kind) {
      case Kind::Vamp:
      case Kind::VampStar:
      case Kind::XVamp:
      case Kind::XVampStar: {
        auto [ca, cb] = heads.alpha_beta(prior.pseudo_inputs);  // (K, d)
        comp = component_log_probs_amortized(lam, ca, cb);
        break;
      }
      case Kind::Vbem:
        comp = component_log_probs_shared(lam, prior.vbem_a, prior.vbem_b);
        break;
      case Kind::VbemStar:
        comp = component_log_probs_shared(lam, nd::softplus(prior.vbem_raw_a),
                                          nd::softplus(prior.vbem_raw_b));
        break;
      default:
        throw std::logic_error("kl_term: unhandled prior kind");
    }
    Tensor lse = nd::log_sum_exp(nd::clamp_min(comp + lw, kLogFloor));  // (n)
    cross_acc = cross_acc.defined() ? cross_acc + lse : lse;
  }
  Tensor cross = cross_acc / static_cast<double>(s_count);
  return nd::neg(entropy + cross);
}

}  // namespace varprec::priors
