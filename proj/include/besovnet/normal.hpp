#pragma once

// Standard normal helpers that stay accurate far into the tails.

namespace besovnet {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_log_pdf(double z);

/// Q(z) = P(Z > z).
double normal_survival(double z);

/// log Q(z); finite for every finite z (asymptotic expansion past erfc underflow).
double normal_log_survival(double z);

/// Q^{-1}(p) for p in (0, 1).
double normal_inverse_survival(double p);

/// Q^{-1}(exp(log_p)); usable when p itself underflows.
double normal_inverse_survival_log(double log_p);

/// log(1/2 - Q(x)) for x > 0, given log x. Accurate when x is tiny.
double log_half_minus_survival(double log_x);

/// log(exp(a) + exp(b)).
double log_add_exp(double a, double b);

/// log(exp(a) - exp(b)) for a >= b.
double log_sub_exp(double a, double b);

}  // namespace besovnet
