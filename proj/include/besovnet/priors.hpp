#pragma once

// Priors on network parameters: exact-S spike-and-slab, the two-scale Gaussian
// mixture, generic product (shrinkage) priors and the adaptive architecture
// prior over (N, L, B).

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "besovnet/arch_design.hpp"
#include "besovnet/rng.hpp"

namespace besovnet {

// ---------------------------------------------------------------- spike-and-slab

struct SpikeSlabSpec {
  std::int64_t T = 1;
  std::int64_t S = 1;
  double B = 1.0;

  void validate() const;
};

/// Active set (0-based, sorted) and the values placed on it.
struct SparseDraw {
  std::vector<std::int64_t> gamma;
  std::vector<double> values;

  std::vector<double> to_dense(std::int64_t T) const;
};

struct LogDensity {
  double value = 0.0;
  bool in_support = true;
};

/// -log C(T, S) - S log(2B); value = -inf and in_support = false when a value leaves [-B, B].
LogDensity spike_slab_log_density(const SparseDraw& draw, const SpikeSlabSpec& spec);

SparseDraw spike_slab_sample(const SpikeSlabSpec& spec, Rng& rng);
SparseDraw spike_slab_sample(const SpikeSlabSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------- Gaussian mixture

/// log(pi1 N(theta; 0, sigma1^2) + pi2 N(theta; 0, sigma2^2)) with sigma1 taken as log.
/// Weights may be 0 or 1 here (degenerate mixtures).
double mixture_log_density(double theta, const MixturePriorSpec& spec);
double mixture_dlog_density(double theta, const MixturePriorSpec& spec);

std::vector<double> mixture_sample(const MixturePriorSpec& spec, std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------- scalar densities

/// Symmetric scalar density g used coordinatewise.
class ScalarDensity {
 public:
  virtual ~ScalarDensity() = default;

  virtual std::string name() const = 0;
  virtual double log_pdf(double t) const = 0;
  virtual double dlog_pdf(double t) const = 0;
  virtual double sample(Rng& rng) const = 0;
  virtual nlohmann::json describe() const = 0;

  /// log of the integral of g over [-a, a].
  virtual double log_central_mass(double a) const;
  /// log of the integral of g over |t| > b.
  virtual double log_two_sided_tail(double b) const;
  /// ratio - (1 - u(a)), evaluated without cancellation where the density allows.
  virtual double spike_margin(double a, double ratio) const;
};

class GaussianDensity final : public ScalarDensity {
 public:
  explicit GaussianDensity(double sigma = 1.0);
  std::string name() const override { return "gauss"; }
  double log_pdf(double t) const override;
  double dlog_pdf(double t) const override;
  double sample(Rng& rng) const override;
  nlohmann::json describe() const override;
  double log_central_mass(double a) const override;
  double log_two_sided_tail(double b) const override;
  double spike_margin(double a, double ratio) const override;

 private:
  double sigma_;
};

class LaplaceDensity final : public ScalarDensity {
 public:
  explicit LaplaceDensity(double scale = 1.0);
  std::string name() const override { return "laplace"; }
  double log_pdf(double t) const override;
  double dlog_pdf(double t) const override;
  double sample(Rng& rng) const override;
  nlohmann::json describe() const override;
  double log_central_mass(double a) const override;
  double log_two_sided_tail(double b) const override;

 private:
  double scale_;
};

/// Uniform on [-B, B]: slab only, no spike.
class UniformSlabDensity final : public ScalarDensity {
 public:
  explicit UniformSlabDensity(double B);
  std::string name() const override { return "uniform-slab"; }
  double log_pdf(double t) const override;
  double dlog_pdf(double t) const override;
  double sample(Rng& rng) const override;
  nlohmann::json describe() const override;
  double log_central_mass(double a) const override;
  double log_two_sided_tail(double b) const override;

 private:
  double B_;
};

class GaussianMixtureDensity final : public ScalarDensity {
 public:
  explicit GaussianMixtureDensity(MixturePriorSpec spec);
  std::string name() const override { return "mixture"; }
  const MixturePriorSpec& spec() const { return spec_; }
  double log_pdf(double t) const override;
  double dlog_pdf(double t) const override;
  double sample(Rng& rng) const override;
  nlohmann::json describe() const override;
  double log_central_mass(double a) const override;
  double log_two_sided_tail(double b) const override;
  double spike_margin(double a, double ratio) const override;

 private:
  MixturePriorSpec spec_;
};

class UnknownDensityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Registered names: "mixture", "gauss", "laplace", "uniform-slab". The
/// mixture takes its hyperparameters from `context`; the uniform slab uses
/// context.B; gauss and laplace are standard (unit scale).
std::shared_ptr<const ScalarDensity> make_density(const std::string& name, const MixturePriorSpec& context);
std::vector<std::string> registered_densities();

/// sum_j log g(theta_j)
double shrinkage_log_prior(std::span<const double> theta, const ScalarDensity& g);

// ---------------------------------------------------------------- parameter priors

/// Prior over the full flat parameter vector, as consumed by the samplers.
class ParameterPrior {
 public:
  virtual ~ParameterPrior() = default;
  virtual std::string name() const = 0;
  virtual double log_density(std::span<const double> theta) const = 0;
  /// Writes d log pi / d theta into grad and returns log pi.
  virtual double log_density_and_grad(std::span<const double> theta, std::span<double> grad) const = 0;
  virtual nlohmann::json describe() const = 0;
};

class ProductPrior final : public ParameterPrior {
 public:
  explicit ProductPrior(std::shared_ptr<const ScalarDensity> g);
  std::string name() const override { return g_->name(); }
  double log_density(std::span<const double> theta) const override;
  double log_density_and_grad(std::span<const double> theta, std::span<double> grad) const override;
  nlohmann::json describe() const override { return g_->describe(); }
  const ScalarDensity& density() const { return *g_; }

 private:
  std::shared_ptr<const ScalarDensity> g_;
};

class DiagonalGaussianPrior final : public ParameterPrior {
 public:
  DiagonalGaussianPrior(std::vector<double> mean, std::vector<double> sd);
  std::string name() const override { return "diag-gauss"; }
  double log_density(std::span<const double> theta) const override;
  double log_density_and_grad(std::span<const double> theta, std::span<double> grad) const override;
  nlohmann::json describe() const override;

 private:
  std::vector<double> mean_;
  std::vector<double> sd_;
};

/// Improper constant log-density 0.
class FlatPrior final : public ParameterPrior {
 public:
  std::string name() const override { return "flat"; }
  double log_density(std::span<const double>) const override { return 0.0; }
  double log_density_and_grad(std::span<const double> theta, std::span<double> grad) const override;
  nlohmann::json describe() const override { return {{"name", "flat"}}; }
};

// ---------------------------------------------------------------- architecture prior

struct ArchPriorSpec {
  double lambda = 1.0;  // N ~ zero-truncated Poisson(lambda)
  double rho = 1.0;     // L ~ zero-truncated Poisson(rho)
  double beta = 1.0;    // B ~ Exponential(beta)
  std::int64_t W1 = 50;
  int d = 1;

  void validate() const;
};

double zero_truncated_poisson_log_pmf(std::int64_t k, double lambda);
/// Inversion sampler; the search stops once the CDF exceeds 1 - 1e-14.
std::int64_t zero_truncated_poisson_sample(double lambda, Rng& rng);

double arch_prior_log_pmf(std::int64_t N, std::int64_t L, double B, const ArchPriorSpec& spec);

struct ArchDraw {
  std::int64_t N = 1;
  std::int64_t L = 1;
  double B = 1.0;
  /// (L, N W1, (L-1) W1^2 N + N, B) with T the dense count at that width.
  NetworkGeometry geometry;
};

ArchDraw arch_prior_sample(const ArchPriorSpec& spec, std::uint64_t seed);

}  // namespace besovnet
