#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "varprec/dataset.hpp"
#include "varprec/distributions.hpp"
#include "varprec/rng.hpp"

namespace varprec::ppc {

// Posterior-predictive-check record for one (method, dataset, trial):
// normalized log predictive likelihood plus bias/RMSE of the mean, variance,
// and sample residual families. Residual arrays are pooled across target
// dimensions and retained for downstream significance testing.
struct Report {
  double log_likelihood = 0.0;
  double mean_bias = 0.0, mean_rmse = 0.0;
  double var_bias = 0.0, var_rmse = 0.0;
  double sample_bias = 0.0, sample_rmse = 0.0;
  std::int64_t n = 0;  // pooled residual count
  std::vector<double> mean_residuals, var_residuals, sample_residuals;
};

// one predictive per target row; a single predictive draw per datum feeds the
// sample residuals
Report evaluate(std::span<const dists::PredictiveDist> predictives, const harness::Matrix& targets,
                Rng& rng);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// two-sided two-sample Kolmogorov-Smirnov test; asymptotic p-value from the
// Kolmogorov distribution with effective size n_a n_b / (n_a + n_b)
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct Tally {
  std::string winner;
  std::map<std::string, bool> tied;  // statistically indistinguishable from the winner
};

// Per-dataset tournament for one metric: the best mean wins; any method whose
// trial distribution is KS-indistinguishable from the winner (p > 0.05) ties.
Tally tally_wins(const std::map<std::string, std::vector<double>>& trials_by_method,
                 bool higher_is_better);

}  // namespace varprec::ppc
