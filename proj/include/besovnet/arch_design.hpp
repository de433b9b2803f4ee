#pragma once

// Closed-form network geometry and prior hyperparameters for Besov-smooth
// regression targets.
//
// All products of the form (B v 1)^(L-1) (W+1)^L are handled in natural-log
// space; the threshold a_n and the spike scale sigma_1n are stored as logs
// because their linear values are far below 1e-50 for realistic designs.

#include <cstdint>
#include <limits>
#include <string>

#include <json.hpp>

namespace besovnet {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SmoothnessSpec {
  double s = 1.0;
  double p = kInfinity;
  double q = kInfinity;
  int d = 1;
  int m = 2;

  /// d / p, zero for p = inf.
  double delta() const;
  /// Throws std::invalid_argument unless d/p < s < min(m, m - 1 + 1/p).
  void validate() const;

  /// Cantor target: s = log 2 / log 3, p = q = inf, d = 1, m = 2.
  static SmoothnessSpec cantor();
  /// Log-singular target: s = 3/2, p = q = 1, d = 1, m = 2.
  static SmoothnessSpec log_singular();
  static SmoothnessSpec for_function(const std::string& id);
};

/// Depth, width, sparsity and magnitude of a ReLU network family.
struct NetworkGeometry {
  int d = 1;
  int L = 1;
  std::int64_t W = 1;
  std::int64_t S = 1;
  double B = 1.0;
  std::int64_t T = 1;
};

struct ArchSpec {
  std::int64_t n = 0;
  std::int64_t N = 0;
  std::int64_t W0 = 0;
  int d = 1;
  int L = 0;
  std::int64_t W = 0;
  std::int64_t S = 0;
  double B = 0.0;
  std::int64_t T = 0;
  double eps = 0.0;
  double tau = 0.0;
  double c_dm = 0.0;
  double xi = 0.0;
  double nu = 0.0;  // +inf when p = inf

  NetworkGeometry geometry() const { return {d, L, W, S, B, T}; }
};

/// How S_n / T_n is counted.
///  - Canonical: S = (L-1) W0^2 N + N and T counts every weight and bias.
///  - Compat: S = L W0^2 N + N and T counts weights only (this reproduces the
///    published pi_2n columns to within 0.5%).
enum class CountConvention { Canonical, Compat };

/// sigma_2n^2 = B^2 / (2 (K0 + 1) n eps^2) for ExperimentDivisor,
/// B^2 / (2 K0 n eps^2) for ExampleDivisor.
enum class SigmaTwoRule { ExperimentDivisor, ExampleDivisor };

/// Spike scale selection.
///  - Admissible: sigma_1 = a / Q^{-1}(lower argument) when the lower bound is
///    informative; otherwise a / Q^{-1}(upper argument / 2), which sits strictly
///    inside the admissible interval.
///  - Saturated: lower-bound expression with its Q^{-1} argument clamped from
///    below at machine epsilon (reproduces the published sigma_1n digits).
enum class SigmaOneRule { Admissible, Saturated };

struct MixtureOptions {
  double K0 = 5.0;
  SigmaTwoRule sigma2_rule = SigmaTwoRule::ExperimentDivisor;
  SigmaOneRule sigma1_rule = SigmaOneRule::Admissible;
  CountConvention counting = CountConvention::Canonical;
};

struct MixturePriorSpec {
  double log_a = 0.0;
  double eta = 0.0;
  double log_sigma1 = 0.0;
  double sigma2 = 1.0;
  double pi1 = 0.5;
  double pi2 = 0.5;
  double B = 1.0;
  double K0 = 5.0;
  /// log of the strict upper bound on sigma_1.
  double log_sigma1_upper = kInfinity;
  /// log of the lower bound on sigma_1; -inf when the bound is vacuous.
  double log_sigma1_lower = -kInfinity;

  void validate() const;
};

std::int64_t base_width(int d, int m);

/// Dense parameter count of a net with widths (d, W, ..., W, 1).
std::int64_t dense_parameter_count(int d, int L, std::int64_t W, bool include_biases = true);

/// n^{-s/(2s+d)} (log n)^{3/2}.
double contraction_rate(const SmoothnessSpec& spec, std::int64_t n);

/// Throws std::invalid_argument on an invalid spec or n < 2.
ArchSpec design_architecture(const SmoothnessSpec& spec, std::int64_t n, double cB = 10.0);

/// log a_n = log eps - log 72 - log L - (L-1) log(B v 1) - L log(W+1).
double log_threshold(const ArchSpec& arch);

/// Sparsity ratio S/T under a counting convention.
double sparsity_ratio(const ArchSpec& arch, CountConvention counting);

MixturePriorSpec mixture_hyperparams(const ArchSpec& arch, const MixtureOptions& options = {});

nlohmann::json to_json(const ArchSpec& arch);
nlohmann::json to_json(const MixturePriorSpec& prior);

}  // namespace besovnet
