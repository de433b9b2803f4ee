#pragma once

// Random-walk Metropolis over the flat parameter vector of a tiny network.
// Used only as a reference posterior for checking the variational engine.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "besovnet/besov_testbed.hpp"
#include "besovnet/priors.hpp"
#include "besovnet/relu_net.hpp"
#include "besovnet/rng.hpp"
#include "besovnet/vi_engine.hpp"

namespace besovnet {

inline constexpr std::size_t kMaxOracleParameters = 200;

struct MHConfig {
  int steps = 20000;
  int burn_in = 5000;
  double proposal_sd = 0.05;
  int thin = 1;
  std::uint64_t seed = 0;
  bool adapt = true;  // tune proposal_sd during burn-in only
  double target_acceptance = 0.234;

  void validate() const;
};

/// One Metropolis accept/reject with a symmetric proposal. Returns true and
/// updates (current, current_logp) on acceptance.
template <class State, class LogTarget>
bool metropolis_step(LogTarget&& log_target, State& current, double& current_logp, State proposal, Rng& rng) {
  const double logp = log_target(proposal);
  const double log_u = std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  if (std::isfinite(logp) && log_u < logp - current_logp) {
    current = std::move(proposal);
    current_logp = logp;
    return true;
  }
  return false;
}

struct ChainSamples {
  std::size_t dim = 0;
  std::vector<double> samples;  // kept x dim, row-major
  std::size_t kept = 0;
  double acceptance_rate = 0.0;  // post burn-in
  double burn_in_acceptance = 0.0;
  double proposal_sd = 0.0;  // value used after burn-in

  std::span<const double> sample(std::size_t k) const { return std::span<const double>(samples).subspan(k * dim, dim); }
  std::vector<double> coordinate(std::size_t i) const;
};

/// Spherical Gaussian random walk on R^dim. During burn-in the log proposal
/// scale moves toward the target acceptance every 50 steps; afterwards it is frozen.
template <class LogTarget>
ChainSamples random_walk_metropolis(LogTarget&& log_target, std::vector<double> init, const MHConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::normal_distribution<double> z;
  ChainSamples out;
  out.dim = init.size();
  double current_logp = log_target(init);
  if (!std::isfinite(current_logp)) throw std::invalid_argument("metropolis: target is not finite at the initial state");
  double log_sd = std::log(config.proposal_sd);
  std::vector<double> current = std::move(init);
  std::size_t accepted_burn = 0, accepted_main = 0, window_accepted = 0;
  for (int step = 0; step < config.steps; ++step) {
    const double sd = std::exp(log_sd);
    std::vector<double> proposal(current);
    for (double& v : proposal) v += sd * z(rng);
    const bool acc = metropolis_step(log_target, current, current_logp, std::move(proposal), rng);
    if (step < config.burn_in) {
      accepted_burn += acc;
      window_accepted += acc;
      if (config.adapt && (step + 1) % 50 == 0) {
        const double rate = static_cast<double>(window_accepted) / 50.0;
        log_sd += 1.5 * (rate - config.target_acceptance) / std::sqrt(1.0 + (step + 1) / 50.0);
        window_accepted = 0;
      }
      continue;
    }
    accepted_main += acc;
    if ((step - config.burn_in) % config.thin == 0) {
      out.samples.insert(out.samples.end(), current.begin(), current.end());
      ++out.kept;
    }
  }
  out.proposal_sd = std::exp(log_sd);
  out.burn_in_acceptance = config.burn_in > 0 ? static_cast<double>(accepted_burn) / config.burn_in : 0.0;
  out.acceptance_rate = static_cast<double>(accepted_main) / static_cast<double>(config.steps - config.burn_in);
  return out;
}

struct MHChain {
  NetworkShape shape;
  ChainSamples chain;
  std::uint64_t seed = 0;
  std::string prior;

  NetworkParams params(std::size_t k) const;
};

/// Chain targeting log pi(theta) + log p(D | theta). Throws std::invalid_argument
/// when T exceeds kMaxOracleParameters or the target is not finite at `init`
/// (zeros when empty).
MHChain mh_sample(const NetworkShape& shape, const Dataset& data, const ParameterPrior& prior, double sigma,
                  const MHConfig& config, std::span<const double> init = {});

/// Effective sample size by Geyer's initial positive sequence.
double effective_sample_size(std::span<const double> series);

std::vector<double> chain_predictive_mean(const MHChain& chain, std::span<const double> grid);

struct CompareReport {
  double max_abs_diff = 0.0;
  double tolerance = 0.0;
  bool within_tolerance = false;
  std::vector<double> vi_mean;
  std::vector<double> mh_mean;
};

/// Throws std::invalid_argument when the network shapes or grids differ.
CompareReport compare_vi_mh(const PredictiveSummary& vi, const MHChain& chain, std::span<const double> grid,
                            double tolerance);

nlohmann::json to_json(const CompareReport& report);

/// <stem>.bin (kept x T float64-le) next to a JSON metadata file at `path`.
void export_chain(const MHChain& chain, const std::filesystem::path& path);

}  // namespace besovnet
