#include "varprec/special.hpp"

#include <limits>
#include <stdexcept>

namespace varprec::special {

double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma: argument must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // psi(x) ~ ln x - 1/(2x) - sum B_2k / (2k x^{2k})
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  series += inv2 * (1.0 / 12.0);
  series -= inv2 * inv2 * (1.0 / 120.0);
  series += inv2 * inv2 * inv2 * (1.0 / 252.0);
  series -= inv2 * inv2 * inv2 * inv2 * (1.0 / 240.0);
  series += inv2 * inv2 * inv2 * inv2 * inv2 * (1.0 / 132.0);
  series -= inv2 * inv2 * inv2 * inv2 * inv2 * inv2 * (691.0 / 32760.0);
  return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("trigamma: argument must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // psi'(x) ~ 1/x + 1/(2x^2) + sum B_2k / x^{2k+1}
  double series = 1.0 + 0.5 * inv;
  series += inv2 * (1.0 / 6.0);
  series -= inv2 * inv2 * (1.0 / 30.0);
  series += inv2 * inv2 * inv2 * (1.0 / 42.0);
  series -= inv2 * inv2 * inv2 * inv2 * (1.0 / 30.0);
  series += inv2 * inv2 * inv2 * inv2 * inv2 * (5.0 / 66.0);
  return result + inv * series;
}

namespace {

// series representation, converges fast for x < a + 1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// continued fraction (modified Lentz), for x >= a + 1; returns Q(a, x)
double gamma_q_cont_frac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

}  // namespace

double reg_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("reg_lower_gamma: shape must be positive");
  if (x < 0.0) throw std::invalid_argument("reg_lower_gamma: x must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cont_frac(a, x);
}

double student_t_log_pdf(double y, double nu, double loc, double scale) {
  const double t = (y - loc) / scale;
  return log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) - 0.5 * std::log(nu * M_PI) -
         std::log(scale) - 0.5 * (nu + 1.0) * std::log1p(t * t / nu);
}

GammaFit gamma_fit_mle(const double* values, long n) {
  if (n <= 0) throw std::invalid_argument("gamma_fit_mle: empty sample");
  double mean = 0.0, mean_log = 0.0;
  for (long i = 0; i < n; ++i) {
    if (!(values[i] > 0.0)) throw std::invalid_argument("gamma_fit_mle: samples must be positive");
    mean += values[i];
    mean_log += std::log(values[i]);
  }
  mean /= static_cast<double>(n);
  mean_log /= static_cast<double>(n);
  const double s = std::log(mean) - mean_log;
  double shape = (s > 0.0) ? (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s)
                           : 1.0;
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(shape) - digamma(shape) - s;
    const double fp = 1.0 / shape - trigamma(shape);
    const double step = f / fp;
    shape -= step;
    if (shape <= 0.0) shape = 1e-8;
    if (std::fabs(step) < 1e-12 * shape) break;
  }
  return {shape, shape / mean};
}

}  // namespace varprec::special
