#include "besovnet/normal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace besovnet {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
// erfc(z / sqrt 2) stays normal up to about z = 37.5.
constexpr double kErfcCutoff = 37.0;
}  // namespace

double normal_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double normal_survival(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

double normal_log_survival(double z) {
  if (z < kErfcCutoff) return std::log(normal_survival(z));
  const double iz2 = 1.0 / (z * z);
  const double series = 1.0 - iz2 * (1.0 - 3.0 * iz2 * (1.0 - 5.0 * iz2 * (1.0 - 7.0 * iz2)));
  return -0.5 * z * z - std::log(z) - kLogSqrt2Pi + std::log(series);
}

double normal_inverse_survival(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_inverse_survival: p must lie in (0, 1)");
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(boost::math::complement(standard, p));
}

double normal_inverse_survival_log(double log_p) {
  if (!(log_p < 0.0)) throw std::domain_error("normal_inverse_survival_log: log p must be negative");
  if (log_p > -700.0) return normal_inverse_survival(std::exp(log_p));
  // Newton on log Q(z) = log_p; log Q is concave so the iteration is monotone from the right.
  double z = std::sqrt(-2.0 * log_p);
  for (int it = 0; it < 100; ++it) {
    const double f = normal_log_survival(z) - log_p;
    const double slope = -std::exp(normal_log_pdf(z) - normal_log_survival(z));
    const double step = f / slope;
    z -= step;
    if (std::abs(step) <= 1e-15 * z) break;
  }
  return z;
}

double log_half_minus_survival(double log_x) {
  if (log_x < -30.0) {
    // 1/2 - Q(x) = x phi(0) (1 - x^2/6 + ...)
    return log_x - kLogSqrt2Pi;
  }
  const double x = std::exp(log_x);
  return std::log(0.5 * std::erf(x * kInvSqrt2));
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_sub_exp(double a, double b) {
  if (b > a) throw std::domain_error("log_sub_exp: b exceeds a");
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log(-std::expm1(b - a));
}

}  // namespace besovnet
