#include "besovnet/shrinkage_conditions.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace besovnet {

namespace {

void spot_check(const ScalarDensity& g, double a, double B) {
  std::vector<double> ts{0.5 * a, a, 2.0 * a};
  for (int k = 0; k <= 60; ++k) ts.push_back(2.0 * B * std::ldexp(1.0, -k));
  std::sort(ts.begin(), ts.end());
  double prev = g.log_pdf(0.0);
  for (double t : ts) {
    const double up = g.log_pdf(t);
    const double down = g.log_pdf(-t);
    if (std::isnan(up) || std::isnan(down)) throw AsymmetricDensityError("density is not evaluable at t = " + std::to_string(t));
    if (up != down && std::abs(up - down) > 1e-9 * std::max(1.0, std::abs(up))) {
      throw AsymmetricDensityError(g.name() + ": asymmetric density detected at t = " + std::to_string(t));
    }
    if (up > prev + 1e-12 * std::max(1.0, std::abs(prev))) {
      throw AsymmetricDensityError(g.name() + ": density increases on t > 0 near t = " + std::to_string(t));
    }
    prev = up;
  }
}

void require_finite_or_neg_inf(double v, const char* what) {
  if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
    throw std::runtime_error(std::string("shrinkage conditions: quadrature failed for ") + what);
  }
}

}  // namespace

ConditionReport check_shrinkage_conditions(const ScalarDensity& g, const ArchSpec& arch, const ConditionOptions& options) {
  if (!(options.K > 0.0 && options.K0 > 0.0 && options.tail_constant > 0.0 && options.support_tolerance > 0.0)) {
    throw std::invalid_argument("shrinkage conditions: constants must be positive");
  }
  ConditionReport r;
  r.n = arch.n;
  r.log_a = log_threshold(arch);
  r.ratio = sparsity_ratio(arch, options.counting);
  r.n_eps2 = static_cast<double>(arch.n) * arch.eps * arch.eps;
  r.eta = std::exp(-options.K * r.n_eps2 / static_cast<double>(arch.S));
  r.eta_K0 = std::exp(-options.K0 * r.n_eps2 / static_cast<double>(arch.S));

  const double a = std::exp(r.log_a);
  spot_check(g, a, arch.B);

  // The spike and tail masses are evaluated at a itself; a may be subnormal
  // or zero in double, in which case the central mass is -inf in log space.
  r.log_u_n = g.log_central_mass(a);
  r.log_one_minus_u_n = g.log_two_sided_tail(a);
  require_finite_or_neg_inf(r.log_u_n, "u_n");
  require_finite_or_neg_inf(r.log_one_minus_u_n, "1 - u_n");
  r.u_n = std::exp(r.log_u_n);
  r.one_minus_u_n = std::exp(r.log_one_minus_u_n);
  r.spike_margin = g.spike_margin(a, r.ratio);
  r.spike_lower_rhs = r.ratio * r.eta;
  const double log_lower_rhs = std::log(r.ratio) - options.K * r.n_eps2 / static_cast<double>(arch.S);
  r.pass_spike = r.spike_margin > 0.0 && r.log_one_minus_u_n >= log_lower_rhs;

  r.neg_log_g_B = -g.log_pdf(arch.B);
  const double log_n = std::log(static_cast<double>(arch.n));
  r.tail_rhs = options.tail_constant * log_n * log_n;
  r.pass_tail = r.neg_log_g_B <= r.tail_rhs;

  r.log_v_n = g.log_two_sided_tail(arch.B);
  require_finite_or_neg_inf(r.log_v_n, "v_n");
  r.v_n = std::exp(r.log_v_n);
  r.log_support_rhs = std::log(options.support_tolerance) - options.K0 * r.n_eps2;
  r.pass_support = r.log_v_n <= r.log_support_rhs;
  return r;
}

nlohmann::json to_json(const ConditionReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(v > 0 ? "inf" : (v < 0 ? "-inf" : "nan")); };
  return nlohmann::json{
      {"n", r.n},
      {"log_a", num(r.log_a)},
      {"ratio", num(r.ratio)},
      {"eta", num(r.eta)},
      {"eta_K0", num(r.eta_K0)},
      {"n_eps2", num(r.n_eps2)},
      {"spike",
       {{"u_n", num(r.u_n)},
        {"log_u_n", num(r.log_u_n)},
        {"one_minus_u_n", num(r.one_minus_u_n)},
        {"log_one_minus_u_n", num(r.log_one_minus_u_n)},
        {"upper_margin", num(r.spike_margin)},
        {"lower_rhs", num(r.spike_lower_rhs)},
        {"pass", r.pass_spike}}},
      {"tail", {{"lhs", num(r.neg_log_g_B)}, {"rhs", num(r.tail_rhs)}, {"pass", r.pass_tail}}},
      {"support",
       {{"v_n", num(r.v_n)}, {"log_v_n", num(r.log_v_n)}, {"log_rhs", num(r.log_support_rhs)}, {"pass", r.pass_support}}},
      {"pass", r.passed()}};
}

}  // namespace besovnet
