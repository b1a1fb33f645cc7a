#include "varprec/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace varprec::ppc {

namespace {

struct BiasRmse {
  double bias, rmse;
};

BiasRmse summarize(const std::vector<double>& r) {
  double sum = 0.0, sumsq = 0.0;
  for (double v : r) {
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(r.size());
  return {sum / n, std::sqrt(sumsq / n)};
}

}  // namespace

Report evaluate(std::span<const dists::PredictiveDist> predictives, const harness::Matrix& targets,
                Rng& rng) {
  if (static_cast<std::int64_t>(predictives.size()) != targets.rows)
    throw std::invalid_argument("ppc::evaluate: need one predictive per target row");
  if (targets.rows == 0) throw std::invalid_argument("ppc::evaluate: empty target set");

  Report rep;
  double ll = 0.0;
  for (std::int64_t i = 0; i < targets.rows; ++i) {
    const auto& pred = predictives[static_cast<std::size_t>(i)];
    const auto row = targets.row(i);
    if (pred.dims() != targets.cols)
      throw std::invalid_argument("ppc::evaluate: predictive dims mismatch at datum " +
                                  std::to_string(i));
    ll += pred.log_prob(row);
    std::vector<double> mean = pred.mean();
    std::vector<double> var;
    try {
      var = pred.variance();
    } catch (const std::domain_error& e) {
      throw std::domain_error("ppc::evaluate: undefined predictive variance at datum " +
                              std::to_string(i) + ": " + e.what());
    }
    const std::vector<double> draw = pred.sample(rng);
    for (std::int64_t j = 0; j < targets.cols; ++j) {
      const double mr = mean[static_cast<std::size_t>(j)] - row[static_cast<std::size_t>(j)];
      rep.mean_residuals.push_back(mr);
      rep.var_residuals.push_back(var[static_cast<std::size_t>(j)] - mr * mr);
      rep.sample_residuals.push_back(draw[static_cast<std::size_t>(j)] - row[static_cast<std::size_t>(j)]);
    }
  }
  rep.n = static_cast<std::int64_t>(rep.mean_residuals.size());
  rep.log_likelihood = ll / static_cast<double>(targets.rows);
  const auto m = summarize(rep.mean_residuals);
  const auto v = summarize(rep.var_residuals);
  const auto s = summarize(rep.sample_residuals);
  rep.mean_bias = m.bias;
  rep.mean_rmse = m.rmse;
  rep.var_bias = v.bias;
  rep.var_rmse = v.rmse;
  rep.sample_bias = s.bias;
  rep.sample_rmse = s.rmse;
  return rep;
}

namespace {

// survival function of the Kolmogorov distribution,
// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2), truncated at 100 terms.
// Below t = 0.05 the mass is numerically zero, so Q = 1.
double kolmogorov_survival(double t) {
  if (t < 0.05) return 1.0;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * std::exp(-2.0 * static_cast<double>(k) * k * t * t);
    q += (k % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < sa.size() && ib < sb.size()) {
    const double x = std::min(sa[ia], sb[ib]);
    while (ia < sa.size() && sa[ia] <= x) ++ia;
    while (ib < sb.size() && sb[ib] <= x) ++ib;
    d = std::fmax(d, std::fabs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  KsResult res;
  res.statistic = d;
  const double ne = na * nb / (na + nb);
  res.p_value = d == 0.0 ? 1.0 : kolmogorov_survival(d * std::sqrt(ne));
  return res;
}

Tally tally_wins(const std::map<std::string, std::vector<double>>& trials_by_method,
                 bool higher_is_better) {
  if (trials_by_method.empty()) throw std::invalid_argument("tally_wins: no methods");
  std::string winner;
  double best = 0.0;
  bool first = true;
  for (const auto& [name, trials] : trials_by_method) {
    if (trials.empty()) throw std::invalid_argument("tally_wins: method '" + name + "' has no trials");
    double mean = 0.0;
    for (double v : trials) mean += v;
    mean /= static_cast<double>(trials.size());
    const double score = higher_is_better ? mean : -mean;
    if (first || score > best) {
      best = score;
      winner = name;
      first = false;
    }
  }
  Tally tally;
  tally.winner = winner;
  const auto& wt = trials_by_method.at(winner);
  for (const auto& [name, trials] : trials_by_method)
    tally.tied[name] = ks_two_sample(trials, wt).p_value > 0.05;
  return tally;
}

}  // namespace varprec::ppc
