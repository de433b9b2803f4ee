#include "besovnet/covering.hpp"

#include "besovnet/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace besovnet {

namespace {

void check_class(std::int64_t L, std::int64_t W, std::int64_t S, double B) {
  if (L < 1 || W < 1 || S < 0 || !(B > 0.0)) throw std::invalid_argument("covering bound: L, W, B must be positive");
}

}  // namespace

double covering_bound_log(std::int64_t L, std::int64_t W, std::int64_t S, double B, double log_delta) {
  check_class(L, W, S, B);
  if (std::isnan(log_delta) || std::isinf(log_delta)) throw std::invalid_argument("covering bound: delta must be positive");
  const double l = static_cast<double>(L);
  const double inner = std::numbers::ln2 - log_delta + std::log(l) + l * std::log(std::max(B, 1.0)) +
                       2.0 * l * std::log(static_cast<double>(W) + 1.0);
  return (static_cast<double>(S) + 1.0) * inner;
}

double covering_bound(std::int64_t L, std::int64_t W, std::int64_t S, double B, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("covering bound: delta must be positive");
  return covering_bound_log(L, W, S, B, std::log(delta));
}

double log_min_truncation_radius(std::int64_t L, std::int64_t W, double B, double log_a) {
  if (log_a == -std::numeric_limits<double>::infinity()) return log_a;
  const double l = static_cast<double>(L);
  return std::numbers::ln2 + log_a + std::log(l) + (l - 1.0) * std::log(std::max(B, 1.0)) +
         l * std::log(static_cast<double>(W) + 1.0);
}

double covering_bound_truncated_log(std::int64_t L, std::int64_t W, std::int64_t S, double B, double log_a,
                                    double log_delta) {
  check_class(L, W, S, B);
  const double log_min = log_min_truncation_radius(L, W, B, log_a);
  const double slack = 1e-12 * std::max(1.0, std::abs(log_min));
  if (log_delta < log_min - slack) {
    throw CoveringPreconditionError("covering_bound_truncated: delta below minimal admissible radius " +
                                        format_double(std::exp(log_min)) + " (log " + format_double(log_min) + ")",
                                    log_min);
  }
  return covering_bound_log(L, W, S, B, log_delta);
}

double covering_bound_truncated(std::int64_t L, std::int64_t W, std::int64_t S, double B, double a, double delta) {
  if (!(a >= 0.0)) throw std::invalid_argument("covering_bound_truncated: a must be >= 0");
  if (!(delta > 0.0)) throw std::invalid_argument("covering bound: delta must be positive");
  const double log_a = (a == 0.0) ? -std::numeric_limits<double>::infinity() : std::log(a);
  return covering_bound_truncated_log(L, W, S, B, log_a, std::log(delta));
}

}  // namespace besovnet
