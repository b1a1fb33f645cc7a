#pragma once

#include <cmath>

namespace varprec::special {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
inline constexpr double kEulerGamma = 0.5772156649015328606065120900824024;

inline double log_gamma(double x) { return std::lgamma(x); }

// digamma psi(x) for x > 0: argument-raising recurrence into the asymptotic
// range, then the Bernoulli-number expansion. Accurate to ~1e-13 down to 0.05.
double digamma(double x);

// trigamma psi'(x) for x > 0, same scheme
double trigamma(double x);

// regularized lower incomplete gamma P(a, x), series / continued fraction split
double reg_lower_gamma(double a, double x);

// log density of Gamma(shape, rate) at z > 0
inline double gamma_log_pdf(double z, double shape, double rate) {
  return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * std::log(z) - rate * z;
}

inline double normal_log_pdf(double y, double mean, double precision) {
  const double r = y - mean;
  return 0.5 * (std::log(precision) - kLog2Pi - precision * r * r);
}

double student_t_log_pdf(double y, double nu, double loc, double scale);

// numerically stable log(1 + e^x) and its inverse
inline double softplus(double x) {
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}
inline double softplus_inverse(double y) { return y + std::log(-std::expm1(-y)); }

// MLE fit of Gamma(shape, rate) to positive samples (Newton on the shape)
struct GammaFit {
  double shape;
  double rate;
};
GammaFit gamma_fit_mle(const double* values, long n);

}  // namespace varprec::special
