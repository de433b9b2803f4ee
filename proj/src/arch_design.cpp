#include "besovnet/arch_design.hpp"

#include "besovnet/normal.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace besovnet {

double SmoothnessSpec::delta() const { return std::isinf(p) ? 0.0 : d / p; }

void SmoothnessSpec::validate() const {
  if (d < 1 || m < 1) throw std::invalid_argument("smoothness spec: d and m must be >= 1");
  if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("smoothness spec: p and q must be positive");
  if (!(s > 0.0) || std::isinf(s)) throw std::invalid_argument("smoothness spec: s must be positive and finite");
  if (!(delta() < s)) throw std::invalid_argument("smoothness spec: requires d/p < s");
  const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
  if (!(s < std::min<double>(m, m - 1 + inv_p))) {
    throw std::invalid_argument("smoothness spec: requires s < min(m, m - 1 + 1/p)");
  }
}

SmoothnessSpec SmoothnessSpec::cantor() {
  return {std::numbers::ln2 / std::log(3.0), kInfinity, kInfinity, 1, 2};
}

SmoothnessSpec SmoothnessSpec::log_singular() { return {1.5, 1.0, 1.0, 1, 2}; }

SmoothnessSpec SmoothnessSpec::for_function(const std::string& id) {
  if (id == "f1") return cantor();
  if (id == "f2") return log_singular();
  throw std::invalid_argument("unknown function id '" + id + "'");
}

std::int64_t base_width(int d, int m) { return 6LL * d * m * (m + 2) + 2LL * d; }

std::int64_t dense_parameter_count(int d, int L, std::int64_t W, bool include_biases) {
  std::int64_t total = 0;
  std::int64_t prev = d;
  for (int l = 1; l <= L + 1; ++l) {
    const std::int64_t width = (l == L + 1) ? 1 : W;
    total += prev * width + (include_biases ? width : 0);
    prev = width;
  }
  return total;
}

double contraction_rate(const SmoothnessSpec& spec, std::int64_t n) {
  const double nn = static_cast<double>(n);
  return std::pow(nn, -spec.s / (2.0 * spec.s + spec.d)) * std::pow(std::log(nn), 1.5);
}

ArchSpec design_architecture(const SmoothnessSpec& spec, std::int64_t n, double cB) {
  spec.validate();
  if (n < 2) throw std::invalid_argument("design_architecture: n must be >= 2");
  if (!(cB > 0.0)) throw std::invalid_argument("design_architecture: cB must be positive");
  ArchSpec a;
  a.n = n;
  a.d = spec.d;
  const double nn = static_cast<double>(n);
  a.N = static_cast<std::int64_t>(std::ceil(std::pow(nn, spec.d / (2.0 * spec.s + spec.d))));
  a.W0 = base_width(spec.d, spec.m);
  const double N = static_cast<double>(a.N);
  // tau involves log N; N = 1 only for tiny n, where it would divide by zero.
  if (a.N < 2) throw std::invalid_argument("design_architecture: n too small (N_n must be >= 2)");
  a.tau = std::pow(N, -spec.s / spec.d) / std::log(N);
  const int dm = std::max(spec.d, spec.m);
  a.c_dm = 1.0 + 2.0 * spec.d * std::numbers::e * std::pow(2.0 * std::numbers::e, spec.m) / std::sqrt(spec.m);
  const double inner = std::ceil(std::log2(std::pow(3.0, dm) / (a.tau * a.c_dm)) + 5.0);
  const double outer = std::ceil(std::log2(static_cast<double>(dm)));
  a.L = 3 + 2 * static_cast<int>(inner) * static_cast<int>(outer);
  a.W = a.N * a.W0;
  a.S = (a.L - 1) * a.W0 * a.W0 * a.N + a.N;
  const double delta = spec.delta();
  double nu_inv = 0.0;
  if (delta > 0.0) {
    a.nu = (spec.s - delta) / (2.0 * delta);
    nu_inv = 1.0 / a.nu;
  } else {
    a.nu = kInfinity;
  }
  a.xi = std::min(1.0, nu_inv + 1.0 / spec.d);
  a.B = cB * std::pow(N, a.xi);
  a.T = dense_parameter_count(spec.d, a.L, a.W);
  a.eps = contraction_rate(spec, n);
  return a;
}

double log_threshold(const ArchSpec& arch) {
  return std::log(arch.eps) - std::log(72.0) - std::log(static_cast<double>(arch.L)) -
         (arch.L - 1) * std::log(std::max(arch.B, 1.0)) - arch.L * std::log(static_cast<double>(arch.W) + 1.0);
}

double sparsity_ratio(const ArchSpec& arch, CountConvention counting) {
  if (counting == CountConvention::Canonical) return static_cast<double>(arch.S) / static_cast<double>(arch.T);
  const double S = static_cast<double>(arch.L) * arch.W0 * arch.W0 * arch.N + arch.N;
  return S / static_cast<double>(dense_parameter_count(arch.d, arch.L, arch.W, false));
}

void MixturePriorSpec::validate() const {
  if (!(pi1 > 0.0 && pi1 < 1.0 && pi2 > 0.0 && pi2 < 1.0)) {
    throw std::invalid_argument("mixture prior: weights must lie in (0, 1)");
  }
  if (std::abs(pi1 + pi2 - 1.0) > 1e-12) throw std::invalid_argument("mixture prior: weights must sum to 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("mixture prior: sigma2 must be positive");
  if (!(log_sigma1 <= log_a)) throw std::invalid_argument("mixture prior: spike wider than threshold");
}

MixturePriorSpec mixture_hyperparams(const ArchSpec& arch, const MixtureOptions& options) {
  if (!(options.K0 > 0.0)) throw std::invalid_argument("mixture_hyperparams: K0 must be positive");
  if (arch.S <= 0 || arch.T <= 0 || arch.n < 2 || !(arch.eps > 0.0) || !(arch.B > 0.0)) {
    throw std::invalid_argument("mixture_hyperparams: malformed architecture");
  }
  MixturePriorSpec mp;
  mp.K0 = options.K0;
  mp.B = arch.B;
  mp.pi2 = sparsity_ratio(arch, options.counting);
  mp.pi1 = 1.0 - mp.pi2;
  if (!(mp.pi2 > 0.0 && mp.pi2 < 1.0)) throw std::invalid_argument("mixture_hyperparams: S/T must lie in (0, 1)");
  const double n_eps2 = static_cast<double>(arch.n) * arch.eps * arch.eps;
  mp.eta = std::exp(-options.K0 * n_eps2 / static_cast<double>(arch.S));
  const double divisor = options.sigma2_rule == SigmaTwoRule::ExperimentDivisor ? options.K0 + 1.0 : options.K0;
  mp.sigma2 = arch.B / std::sqrt(2.0 * divisor * n_eps2);
  mp.log_a = log_threshold(arch);

  // 1 - u_n = 2 pi1 Q(a/sigma1) + 2 pi2 Q(a/sigma2); (1 - u_n) < pi2 iff
  // Q(a/sigma1) < (pi2/pi1)(1/2 - Q(a/sigma2)), and (1 - u_n) >= pi2 eta iff
  // Q(a/sigma1) >= (pi2/pi1)(eta/2 - Q(a/sigma2)).
  const double log_ratio = std::log(mp.pi2) - std::log(mp.pi1);
  const double log_a_over_s2 = mp.log_a - std::log(mp.sigma2);
  const double log_upper_arg = log_ratio + log_half_minus_survival(log_a_over_s2);
  mp.log_sigma1_upper = mp.log_a - std::log(normal_inverse_survival_log(log_upper_arg));
  const double lower_arg = std::exp(log_ratio) * (0.5 * mp.eta - normal_survival(std::exp(log_a_over_s2)));
  const bool lower_informative = lower_arg > 0.0;
  if (lower_informative) mp.log_sigma1_lower = mp.log_a - std::log(normal_inverse_survival(lower_arg));

  if (options.sigma1_rule == SigmaOneRule::Saturated) {
    const double arg = std::clamp(lower_arg, DBL_EPSILON, 1.0 - DBL_EPSILON);
    mp.log_sigma1 = mp.log_a - std::log(normal_inverse_survival(arg));
  } else if (lower_informative) {
    mp.log_sigma1 = mp.log_sigma1_lower;
  } else {
    mp.log_sigma1 = mp.log_a - std::log(normal_inverse_survival_log(log_upper_arg - std::numbers::ln2));
  }
  return mp;
}

nlohmann::json to_json(const ArchSpec& a) {
  return nlohmann::json{{"n", a.n},     {"N", a.N},     {"W0", a.W0},   {"d", a.d},   {"L", a.L},
                        {"W", a.W},     {"S", a.S},     {"B", a.B},     {"T", a.T},   {"eps", a.eps},
                        {"tau", a.tau}, {"c_dm", a.c_dm}, {"xi", a.xi}, {"nu", std::isinf(a.nu) ? nlohmann::json("inf") : nlohmann::json(a.nu)}};
}

nlohmann::json to_json(const MixturePriorSpec& mp) {
  return nlohmann::json{{"log_a", mp.log_a},         {"eta", mp.eta},       {"log_sigma1", mp.log_sigma1},
                        {"sigma2", mp.sigma2},       {"pi1", mp.pi1},       {"pi2", mp.pi2},
                        {"B", mp.B},                 {"K0", mp.K0},         {"log_sigma1_upper", mp.log_sigma1_upper},
                        {"log_sigma1_lower", std::isinf(mp.log_sigma1_lower) ? nlohmann::json("-inf") : nlohmann::json(mp.log_sigma1_lower)}};
}

}  // namespace besovnet
