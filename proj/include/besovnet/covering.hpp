#pragma once

// Metric-entropy bounds for sparse bounded ReLU network classes in sup norm.

#include <cstdint>
#include <stdexcept>
#include <string>

namespace besovnet {

/// log N(delta, Phi(L, W, S, B), sup) <= (S+1) log(2 L (B v 1)^L (W+1)^{2L} / delta).
double covering_bound(std::int64_t L, std::int64_t W, std::int64_t S, double B, double delta);

/// Same bound with delta given as log delta.
double covering_bound_log(std::int64_t L, std::int64_t W, std::int64_t S, double B, double log_delta);

/// log of 2 a L (B v 1)^{L-1} (W+1)^L, the smallest radius admissible for the
/// thresholded class. -inf when a = 0.
double log_min_truncation_radius(std::int64_t L, std::int64_t W, double B, double log_a);

class CoveringPreconditionError : public std::invalid_argument {
 public:
  CoveringPreconditionError(const std::string& what, double log_min_delta)
      : std::invalid_argument(what), log_min_delta_(log_min_delta) {}
  double log_min_delta() const { return log_min_delta_; }

 private:
  double log_min_delta_;
};

/// Bound for the class of nets whose a-thresholded parameters lie in
/// Theta(L, W, S, B). Requires delta >= 2 a L (B v 1)^{L-1} (W+1)^L, compared
/// in log space with a relative slack of 1e-12; otherwise throws
/// CoveringPreconditionError carrying the minimal delta.
double covering_bound_truncated(std::int64_t L, std::int64_t W, std::int64_t S, double B, double a, double delta);
double covering_bound_truncated_log(std::int64_t L, std::int64_t W, std::int64_t S, double B, double log_a,
                                    double log_delta);

}  // namespace besovnet
