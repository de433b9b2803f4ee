#include "besovnet/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "besovnet/normal.hpp"

namespace besovnet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

/// |t| / sigma given log sigma, without forming 0 * inf.
double scaled_abs(double t, double log_sigma) {
  if (t == 0.0) return 0.0;
  return std::exp(std::log(std::abs(t)) - log_sigma);
}

double quad(const auto& f, double lo, double hi) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-12, &err);
}

}  // namespace

// ---------------------------------------------------------------- spike-and-slab

void SpikeSlabSpec::validate() const {
  if (!(S > 0 && S <= T)) throw std::invalid_argument("spike-slab: need 0 < S <= T");
  if (!(B > 0.0)) throw std::invalid_argument("spike-slab: B must be positive");
}

std::vector<double> SparseDraw::to_dense(std::int64_t T) const {
  std::vector<double> theta(static_cast<std::size_t>(T), 0.0);
  for (std::size_t k = 0; k < gamma.size(); ++k) theta.at(static_cast<std::size_t>(gamma[k])) = values[k];
  return theta;
}

LogDensity spike_slab_log_density(const SparseDraw& draw, const SpikeSlabSpec& spec) {
  spec.validate();
  if (draw.gamma.size() != static_cast<std::size_t>(spec.S) || draw.values.size() != draw.gamma.size()) {
    throw std::invalid_argument("spike-slab: draw size does not match S");
  }
  for (std::size_t k = 0; k < draw.gamma.size(); ++k) {
    if (draw.gamma[k] < 0 || draw.gamma[k] >= spec.T) throw std::invalid_argument("spike-slab: index out of range");
    if (k > 0 && draw.gamma[k] <= draw.gamma[k - 1]) throw std::invalid_argument("spike-slab: indices must be sorted and distinct");
  }
  if (std::any_of(draw.values.begin(), draw.values.end(), [&](double v) { return !(std::abs(v) <= spec.B); })) {
    return {kNegInf, false};
  }
  const double T = static_cast<double>(spec.T);
  const double S = static_cast<double>(spec.S);
  const double log_binom = std::lgamma(T + 1.0) - std::lgamma(S + 1.0) - std::lgamma(T - S + 1.0);
  return {-log_binom - S * std::log(2.0 * spec.B), true};
}

SparseDraw spike_slab_sample(const SpikeSlabSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<std::int64_t> population(static_cast<std::size_t>(spec.T));
  std::iota(population.begin(), population.end(), std::int64_t{0});
  SparseDraw draw;
  draw.gamma.reserve(static_cast<std::size_t>(spec.S));
  // Selection sampling over a forward range keeps the output sorted.
  std::sample(population.begin(), population.end(), std::back_inserter(draw.gamma), spec.S, rng);
  std::uniform_real_distribution<double> slab(-spec.B, spec.B);
  draw.values.resize(draw.gamma.size());
  for (double& v : draw.values) v = slab(rng);
  return draw;
}

SparseDraw spike_slab_sample(const SpikeSlabSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return spike_slab_sample(spec, rng);
}

// ---------------------------------------------------------------- Gaussian mixture

namespace {

void check_weights(const MixturePriorSpec& spec) {
  if (!(spec.pi1 >= 0.0 && spec.pi2 >= 0.0 && std::abs(spec.pi1 + spec.pi2 - 1.0) <= 1e-12)) {
    throw std::invalid_argument("mixture: weights must be nonnegative and sum to 1");
  }
  if (!(spec.sigma2 > 0.0)) throw std::invalid_argument("mixture: sigma2 must be positive");
}

struct ComponentTerms {
  double spike;
  double slab;
};

ComponentTerms component_log_terms(double theta, const MixturePriorSpec& spec) {
  const double log_s2 = std::log(spec.sigma2);
  const double z1 = scaled_abs(theta, spec.log_sigma1);
  const double z2 = scaled_abs(theta, log_s2);
  return {safe_log(spec.pi1) + normal_log_pdf(z1) - spec.log_sigma1, safe_log(spec.pi2) + normal_log_pdf(z2) - log_s2};
}

}  // namespace

double mixture_log_density(double theta, const MixturePriorSpec& spec) {
  check_weights(spec);
  const auto terms = component_log_terms(theta, spec);
  return log_add_exp(terms.spike, terms.slab);
}

double mixture_dlog_density(double theta, const MixturePriorSpec& spec) {
  check_weights(spec);
  if (theta == 0.0) return 0.0;
  const auto terms = component_log_terms(theta, spec);
  const double lg = log_add_exp(terms.spike, terms.slab);
  const double w1 = terms.spike == kNegInf ? 0.0 : std::exp(terms.spike - lg - 2.0 * spec.log_sigma1);
  const double w2 = terms.slab == kNegInf ? 0.0 : std::exp(terms.slab - lg - 2.0 * std::log(spec.sigma2));
  return -theta * (w1 + w2);
}

std::vector<double> mixture_sample(const MixturePriorSpec& spec, std::size_t count, std::uint64_t seed) {
  check_weights(spec);
  if (count == 0) throw std::invalid_argument("mixture_sample: count must be >= 1");
  Rng rng(seed);
  std::bernoulli_distribution slab(spec.pi2);
  std::normal_distribution<double> z;
  const double s1 = std::exp(spec.log_sigma1);
  std::vector<double> out(count);
  for (double& v : out) {
    const bool wide = slab(rng);
    v = (wide ? spec.sigma2 : s1) * z(rng);
  }
  return out;
}

// ---------------------------------------------------------------- scalar densities

double ScalarDensity::log_central_mass(double a) const {
  if (!(a > 0.0)) return kNegInf;
  const double log_g0 = log_pdf(0.0);
  const double integral = quad([&](double s) { return std::exp(log_pdf(a * s) - log_g0); }, 0.0, 1.0);
  return kLn2 + std::log(a) + log_g0 + std::log(integral);
}

double ScalarDensity::log_two_sided_tail(double b) const {
  if (!(b > 0.0)) return 0.0;
  const double central = log_central_mass(b);
  if (central < -kLn2) return std::log1p(-std::exp(central));
  const double log_gb = log_pdf(b);
  if (log_gb == kNegInf) return kNegInf;
  const double integral =
      quad([&](double u) { return std::exp(log_pdf(b + u) - log_gb); }, 0.0, std::numeric_limits<double>::infinity());
  return kLn2 + log_gb + std::log(integral);
}

double ScalarDensity::spike_margin(double a, double ratio) const { return ratio - std::exp(log_two_sided_tail(a)); }

GaussianDensity::GaussianDensity(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gauss: sigma must be positive");
}

double GaussianDensity::log_pdf(double t) const { return normal_log_pdf(t / sigma_) - std::log(sigma_); }
double GaussianDensity::dlog_pdf(double t) const { return -t / (sigma_ * sigma_); }
double GaussianDensity::sample(Rng& rng) const { return sigma_ * std::normal_distribution<double>()(rng); }
nlohmann::json GaussianDensity::describe() const { return {{"name", name()}, {"sigma", sigma_}}; }

double GaussianDensity::log_central_mass(double a) const {
  if (!(a > 0.0)) return kNegInf;
  return kLn2 + log_half_minus_survival(std::log(a / sigma_));
}

double GaussianDensity::log_two_sided_tail(double b) const {
  if (!(b > 0.0)) return 0.0;
  return kLn2 + normal_log_survival(b / sigma_);
}

double GaussianDensity::spike_margin(double a, double ratio) const {
  return ratio - std::erfc(a / (sigma_ * std::numbers::sqrt2));
}

LaplaceDensity::LaplaceDensity(double scale) : scale_(scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("laplace: scale must be positive");
}

double LaplaceDensity::log_pdf(double t) const { return -std::abs(t) / scale_ - std::log(2.0 * scale_); }
double LaplaceDensity::dlog_pdf(double t) const { return t > 0.0 ? -1.0 / scale_ : (t < 0.0 ? 1.0 / scale_ : 0.0); }
double LaplaceDensity::sample(Rng& rng) const {
  const double e = std::exponential_distribution<double>(1.0)(rng);
  return std::bernoulli_distribution(0.5)(rng) ? scale_ * e : -scale_ * e;
}
nlohmann::json LaplaceDensity::describe() const { return {{"name", name()}, {"scale", scale_}}; }

double LaplaceDensity::log_central_mass(double a) const {
  if (!(a > 0.0)) return kNegInf;
  return std::log(-std::expm1(-a / scale_));
}

double LaplaceDensity::log_two_sided_tail(double b) const { return b > 0.0 ? -b / scale_ : 0.0; }

UniformSlabDensity::UniformSlabDensity(double B) : B_(B) {
  if (!(B > 0.0)) throw std::invalid_argument("uniform-slab: B must be positive");
}

double UniformSlabDensity::log_pdf(double t) const { return std::abs(t) <= B_ ? -std::log(2.0 * B_) : kNegInf; }
double UniformSlabDensity::dlog_pdf(double) const { return 0.0; }
double UniformSlabDensity::sample(Rng& rng) const { return std::uniform_real_distribution<double>(-B_, B_)(rng); }
nlohmann::json UniformSlabDensity::describe() const { return {{"name", name()}, {"B", B_}}; }

double UniformSlabDensity::log_central_mass(double a) const {
  if (!(a > 0.0)) return kNegInf;
  return std::log(std::min(a, B_) / B_);
}

double UniformSlabDensity::log_two_sided_tail(double b) const {
  if (!(b > 0.0)) return 0.0;
  return b >= B_ ? kNegInf : std::log1p(-b / B_);
}

GaussianMixtureDensity::GaussianMixtureDensity(MixturePriorSpec spec) : spec_(spec) { check_weights(spec_); }

double GaussianMixtureDensity::log_pdf(double t) const { return mixture_log_density(t, spec_); }
double GaussianMixtureDensity::dlog_pdf(double t) const { return mixture_dlog_density(t, spec_); }

double GaussianMixtureDensity::sample(Rng& rng) const {
  const bool wide = std::bernoulli_distribution(spec_.pi2)(rng);
  const double z = std::normal_distribution<double>()(rng);
  return (wide ? spec_.sigma2 : std::exp(spec_.log_sigma1)) * z;
}

nlohmann::json GaussianMixtureDensity::describe() const {
  nlohmann::json j = to_json(spec_);
  j["name"] = name();
  return j;
}

double GaussianMixtureDensity::log_central_mass(double a) const {
  if (!(a > 0.0)) return kNegInf;
  const double log_a = std::log(a);
  const double spike = safe_log(spec_.pi1) + kLn2 + log_half_minus_survival(log_a - spec_.log_sigma1);
  const double slab = safe_log(spec_.pi2) + kLn2 + log_half_minus_survival(log_a - std::log(spec_.sigma2));
  return log_add_exp(spike, slab);
}

double GaussianMixtureDensity::log_two_sided_tail(double b) const {
  if (!(b > 0.0)) return 0.0;
  const double spike = safe_log(spec_.pi1) + kLn2 + normal_log_survival(scaled_abs(b, spec_.log_sigma1));
  const double slab = safe_log(spec_.pi2) + kLn2 + normal_log_survival(b / spec_.sigma2);
  return log_add_exp(spike, slab);
}

double GaussianMixtureDensity::spike_margin(double a, double ratio) const {
  // 1 - u(a) = pi2 (1 - c2) + pi1 t1 with c2 = 1 - 2Q(a/sigma2) and
  // t1 = 2Q(a/sigma1); both are tiny, so expand around pi2.
  const double log_a = std::log(a);
  const double c2 = std::exp(kLn2 + log_half_minus_survival(log_a - std::log(spec_.sigma2)));
  const double t1 = std::exp(kLn2 + normal_log_survival(std::exp(log_a - spec_.log_sigma1)));
  return (ratio - spec_.pi2) + spec_.pi2 * c2 - spec_.pi1 * t1;
}

std::shared_ptr<const ScalarDensity> make_density(const std::string& name, const MixturePriorSpec& context) {
  if (name == "mixture") return std::make_shared<GaussianMixtureDensity>(context);
  if (name == "gauss") return std::make_shared<GaussianDensity>(1.0);
  if (name == "laplace") return std::make_shared<LaplaceDensity>(1.0);
  if (name == "uniform-slab") return std::make_shared<UniformSlabDensity>(context.B);
  throw UnknownDensityError("unknown density '" + name + "'");
}

std::vector<std::string> registered_densities() { return {"mixture", "gauss", "laplace", "uniform-slab"}; }

double shrinkage_log_prior(std::span<const double> theta, const ScalarDensity& g) {
  double total = 0.0;
  for (double t : theta) total += g.log_pdf(t);
  return total;
}

// ---------------------------------------------------------------- parameter priors

ProductPrior::ProductPrior(std::shared_ptr<const ScalarDensity> g) : g_(std::move(g)) {
  if (!g_) throw std::invalid_argument("ProductPrior: null density");
}

double ProductPrior::log_density(std::span<const double> theta) const { return shrinkage_log_prior(theta, *g_); }

double ProductPrior::log_density_and_grad(std::span<const double> theta, std::span<double> grad) const {
  if (grad.size() != theta.size()) throw std::invalid_argument("prior: gradient buffer has wrong length");
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    total += g_->log_pdf(theta[i]);
    grad[i] = g_->dlog_pdf(theta[i]);
  }
  return total;
}

DiagonalGaussianPrior::DiagonalGaussianPrior(std::vector<double> mean, std::vector<double> sd)
    : mean_(std::move(mean)), sd_(std::move(sd)) {
  if (mean_.size() != sd_.size()) throw std::invalid_argument("diag-gauss prior: mean and sd lengths differ");
  if (std::any_of(sd_.begin(), sd_.end(), [](double s) { return !(s > 0.0); })) {
    throw std::invalid_argument("diag-gauss prior: sd must be positive");
  }
}

double DiagonalGaussianPrior::log_density(std::span<const double> theta) const {
  if (theta.size() != mean_.size()) throw std::invalid_argument("diag-gauss prior: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) total += normal_log_pdf((theta[i] - mean_[i]) / sd_[i]) - std::log(sd_[i]);
  return total;
}

double DiagonalGaussianPrior::log_density_and_grad(std::span<const double> theta, std::span<double> grad) const {
  if (grad.size() != theta.size()) throw std::invalid_argument("prior: gradient buffer has wrong length");
  for (std::size_t i = 0; i < theta.size(); ++i) grad[i] = -(theta[i] - mean_[i]) / (sd_[i] * sd_[i]);
  return log_density(theta);
}

nlohmann::json DiagonalGaussianPrior::describe() const { return {{"name", name()}, {"T", mean_.size()}}; }

double FlatPrior::log_density_and_grad(std::span<const double> theta, std::span<double> grad) const {
  if (grad.size() != theta.size()) throw std::invalid_argument("prior: gradient buffer has wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  return 0.0;
}

// ---------------------------------------------------------------- architecture prior

void ArchPriorSpec::validate() const {
  if (!(lambda > 0.0 && rho > 0.0 && beta > 0.0)) throw std::invalid_argument("arch prior: rates must be positive");
  if (W1 < 1 || d < 1) throw std::invalid_argument("arch prior: W1 and d must be >= 1");
}

double zero_truncated_poisson_log_pmf(std::int64_t k, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("zero-truncated Poisson: lambda must be positive");
  if (k < 1) throw std::invalid_argument("zero-truncated Poisson: support is k >= 1");
  const double kk = static_cast<double>(k);
  // log(e^lambda - 1) = lambda + log(1 - e^-lambda)
  return kk * std::log(lambda) - std::lgamma(kk + 1.0) - (lambda + std::log(-std::expm1(-lambda)));
}

std::int64_t zero_truncated_poisson_sample(double lambda, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto k_max = static_cast<std::int64_t>(10.0 * lambda + 1000.0);
  double cdf = 0.0;
  for (std::int64_t k = 1; k < k_max; ++k) {
    cdf += std::exp(zero_truncated_poisson_log_pmf(k, lambda));
    if (u < cdf || cdf >= 1.0 - 1e-14) return k;
  }
  return k_max;
}

double arch_prior_log_pmf(std::int64_t N, std::int64_t L, double B, const ArchPriorSpec& spec) {
  spec.validate();
  if (N < 1 || L < 1 || !(B > 0.0)) throw std::invalid_argument("arch prior: invalid support (need N, L >= 1, B > 0)");
  return zero_truncated_poisson_log_pmf(N, spec.lambda) + zero_truncated_poisson_log_pmf(L, spec.rho) +
         std::log(spec.beta) - spec.beta * B;
}

ArchDraw arch_prior_sample(const ArchPriorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ArchDraw draw;
  draw.N = zero_truncated_poisson_sample(spec.lambda, rng);
  draw.L = zero_truncated_poisson_sample(spec.rho, rng);
  draw.B = std::exponential_distribution<double>(spec.beta)(rng);
  const std::int64_t W = draw.N * spec.W1;
  draw.geometry = {spec.d,
                   static_cast<int>(draw.L),
                   W,
                   (draw.L - 1) * spec.W1 * spec.W1 * draw.N + draw.N,
                   draw.B,
                   dense_parameter_count(spec.d, static_cast<int>(draw.L), W)};
  return draw;
}

}  // namespace besovnet
