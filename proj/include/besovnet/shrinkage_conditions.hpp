#pragma once

// Numerical check of the three shrinkage conditions (spike mass near zero,
// density height at B_n, mass outside [-B_n, B_n]) for a product prior.

#include <cstdint>
#include <stdexcept>

#include <json.hpp>

#include "besovnet/arch_design.hpp"
#include "besovnet/priors.hpp"

namespace besovnet {

struct ConditionOptions {
  double K = 5.0;   // eta_n = exp(-K n eps^2 / S_n) in the spike condition
  double K0 = 5.0;  // support condition exponent
  double tail_constant = 10.0;  // C in -log g(B_n) <= C (log n)^2
  double support_tolerance = 1.0;  // v_n <= tol * exp(-K0 n eps^2)
  CountConvention counting = CountConvention::Canonical;
};

class AsymmetricDensityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConditionReport {
  std::int64_t n = 0;
  double log_a = 0.0;
  double ratio = 0.0;  // S_n / T_n
  double eta = 0.0;    // with K
  double eta_K0 = 0.0;  // with K0
  double n_eps2 = 0.0;

  double u_n = 0.0;
  double log_u_n = 0.0;
  double one_minus_u_n = 0.0;
  double log_one_minus_u_n = 0.0;
  /// ratio - (1 - u_n), evaluated without cancellation
  double spike_margin = 0.0;
  double spike_lower_rhs = 0.0;  // ratio * eta

  double neg_log_g_B = 0.0;
  double tail_rhs = 0.0;  // C (log n)^2

  double v_n = 0.0;
  double log_v_n = 0.0;
  double log_support_rhs = 0.0;  // log tol - K0 n eps^2

  bool pass_spike = false;
  bool pass_tail = false;
  bool pass_support = false;

  bool passed() const { return pass_spike && pass_tail && pass_support; }
};

/// Throws AsymmetricDensityError when g fails the symmetry or monotonicity
/// spot-check, std::runtime_error when a mass evaluation is not finite.
ConditionReport check_shrinkage_conditions(const ScalarDensity& g, const ArchSpec& arch,
                                           const ConditionOptions& options = {});

nlohmann::json to_json(const ConditionReport& report);

}  // namespace besovnet
