#pragma once

// Mean-field Gaussian variational inference (Bayes by Backprop) for a
// fixed-architecture ReLU regression network with known noise level.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "besovnet/besov_testbed.hpp"
#include "besovnet/priors.hpp"
#include "besovnet/relu_net.hpp"

namespace besovnet {

inline constexpr int kSchemaVersion = 1;

double softplus(double rho);
double softplus_inverse(double sigma);
double sigmoid(double x);

struct VariationalState {
  NetworkShape shape;
  std::vector<double> mu;
  std::vector<double> rho;  // sigma_q = softplus(rho)
  std::int64_t step = 0;
  std::uint64_t seed = 0;

  /// mu ~ N(0, 1/fan_in) per coordinate, rho such that sigma_q = init_sigma_q.
  static VariationalState initialize(const NetworkShape& shape, std::uint64_t seed, double init_sigma_q = 1e-2);

  std::vector<double> sigma() const;
  std::size_t size() const { return mu.size(); }
  void validate() const;
  /// theta = mu + sigma_q * zeta
  void reparameterize(std::span<const double> zeta, std::span<double> theta) const;
};

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  int iterations = 3000;
  int batch_size = 0;  // 0 uses the full dataset each step
  int mc_samples = 1;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
  double init_sigma_q = 1e-2;
  double noise_sd = 0.1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);

struct ElboEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double data_term = 0.0;
  double kl = 0.0;  // E_q[log q - log pi]
  double kl_std_error = 0.0;
  int mc = 0;
};

/// Monte Carlo ELBO with mc reparameterized draws; deterministic in seed.
ElboEstimate elbo_estimate(const VariationalState& state, const Dataset& data, const ParameterPrior& prior, double sigma,
                           int mc, std::uint64_t seed);

struct ElboGradient {
  double objective = 0.0;
  std::vector<double> mu;
  std::vector<double> rho;
};

/// Single-draw ELBO log p(D|theta) + log pi(theta) - log q(theta) with the
/// standard normal draws zeta held fixed, as a function of (mu, rho).
/// `weight` scales the data term (n / batch for mini-batches).
double frozen_objective(const VariationalState& state, const Dataset& data, const ParameterPrior& prior, double sigma,
                        std::span<const double> zeta, double weight = 1.0);

/// Exact gradient of frozen_objective in (mu, rho).
ElboGradient frozen_gradient(const VariationalState& state, const Dataset& data, const ParameterPrior& prior,
                             double sigma, std::span<const double> zeta, double weight = 1.0);

/// Average of frozen_gradient over mc fresh draws; deterministic in seed.
ElboGradient elbo_gradient(const VariationalState& state, const Dataset& data, const ParameterPrior& prior, double sigma,
                           int mc, std::uint64_t seed);

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, std::int64_t iteration, std::vector<double> trace)
      : std::runtime_error(what), iteration_(iteration), trace_(std::move(trace)) {}
  std::int64_t iteration() const { return iteration_; }
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::int64_t iteration_;
  std::vector<double> trace_;
};

struct TrainResult {
  VariationalState state;
  std::vector<double> elbo_trace;  // one single-draw estimate per iteration
};

/// Throws TrainingDivergence when the objective or an iterate stops being finite.
TrainResult train(const NetworkShape& shape, const Dataset& data, const ParameterPrior& prior, const TrainConfig& config);

/// Same, continuing from an existing state.
TrainResult train(VariationalState state, const Dataset& data, const ParameterPrior& prior, const TrainConfig& config);

struct PredictiveSummary {
  std::string shape;  // NetworkShape::describe()
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> lower;  // pointwise alpha/2 quantile
  std::vector<double> upper;  // pointwise 1 - alpha/2 quantile
  std::vector<double> sd;
  std::vector<double> lower_sd;  // mean - z sd
  std::vector<double> upper_sd;  // mean + z sd
  double alpha = 0.05;
  int draws = 0;
  /// ||f_k - f0||_n over the training inputs, one per draw
  std::vector<double> errors;
  /// ||mean_k f_k - f0||_n over the training inputs
  double posterior_mean_error = 0.0;
};

/// Linear-interpolation empirical quantile of unsorted values.
double empirical_quantile(std::vector<double> values, double prob);

PredictiveSummary posterior_predictive(const VariationalState& state, std::span<const double> grid, int draws,
                                       const TrueFunction& f0, const Dataset& data, double alpha, std::uint64_t seed);

/// JSON envelope at `path`; mu and rho go to sibling files <stem>.mu.bin and
/// <stem>.rho.bin as little-endian float64.
void save_checkpoint(const VariationalState& state, const std::filesystem::path& path);
VariationalState load_checkpoint(const std::filesystem::path& path);

void write_f64le(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64le(const std::filesystem::path& path);

}  // namespace besovnet
