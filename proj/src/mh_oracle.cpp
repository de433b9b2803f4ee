#include "besovnet/mh_oracle.hpp"

#include <algorithm>
#include <fstream>

namespace besovnet {

void MHConfig::validate() const {
  if (!(steps > burn_in && burn_in >= 0)) throw std::invalid_argument("MH config: need steps > burn_in >= 0");
  if (!(proposal_sd > 0.0)) throw std::invalid_argument("MH config: proposal_sd must be positive");
  if (thin < 1) throw std::invalid_argument("MH config: thin must be >= 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw std::invalid_argument("MH config: target acceptance in (0, 1)");
}

std::vector<double> ChainSamples::coordinate(std::size_t i) const {
  if (i >= dim) throw std::out_of_range("chain coordinate out of range");
  std::vector<double> out(kept);
  for (std::size_t k = 0; k < kept; ++k) out[k] = samples[k * dim + i];
  return out;
}

NetworkParams MHChain::params(std::size_t k) const {
  const auto s = chain.sample(k);
  return NetworkParams(shape, std::vector<double>(s.begin(), s.end()));
}

MHChain mh_sample(const NetworkShape& shape, const Dataset& data, const ParameterPrior& prior, double sigma,
                  const MHConfig& config, std::span<const double> init) {
  const std::size_t T = shape.parameter_count();
  if (T > kMaxOracleParameters) {
    throw std::invalid_argument("mh_sample: network has " + std::to_string(T) + " parameters, cap is " +
                                std::to_string(kMaxOracleParameters));
  }
  if (data.d != shape.d_in) throw std::invalid_argument("mh_sample: dataset dimension mismatch");
  if (!init.empty() && init.size() != T) throw std::invalid_argument("mh_sample: initial state has wrong length");
  std::vector<double> start = init.empty() ? std::vector<double>(T, 0.0) : std::vector<double>(init.begin(), init.end());
  auto target = [&](const std::vector<double>& theta) {
    const double lp = prior.log_density(theta);
    if (!std::isfinite(lp)) return lp;
    return lp + loglik(shape, theta, data.x, data.y, sigma);
  };
  MHChain out;
  out.shape = shape;
  out.seed = config.seed;
  out.prior = prior.name();
  out.chain = random_walk_metropolis(target, std::move(start), config);
  return out;
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  // Sum of consecutive autocorrelation pairs while they stay positive.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

std::vector<double> chain_predictive_mean(const MHChain& chain, std::span<const double> grid) {
  if (chain.chain.kept == 0) throw std::invalid_argument("chain_predictive_mean: empty chain");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size() / static_cast<std::size_t>(chain.shape.d_in)));
  for (std::size_t k = 0; k < chain.chain.kept; ++k) acc += forward_batch(chain.shape, chain.chain.sample(k), grid);
  acc /= static_cast<double>(chain.chain.kept);
  return {acc.data(), acc.data() + acc.size()};
}

CompareReport compare_vi_mh(const PredictiveSummary& vi, const MHChain& chain, std::span<const double> grid,
                            double tolerance) {
  if (vi.shape != chain.shape.describe()) {
    throw std::invalid_argument("compare_vi_mh: network shapes differ (" + vi.shape + " vs " + chain.shape.describe() + ")");
  }
  if (!std::equal(vi.grid.begin(), vi.grid.end(), grid.begin(), grid.end())) {
    throw std::invalid_argument("compare_vi_mh: evaluation grids differ");
  }
  CompareReport r;
  r.tolerance = tolerance;
  r.vi_mean = vi.mean;
  r.mh_mean = chain_predictive_mean(chain, grid);
  for (std::size_t j = 0; j < r.vi_mean.size(); ++j) r.max_abs_diff = std::max(r.max_abs_diff, std::abs(r.vi_mean[j] - r.mh_mean[j]));
  r.within_tolerance = r.max_abs_diff < tolerance;
  return r;
}

nlohmann::json to_json(const CompareReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"max_abs_diff", r.max_abs_diff},
          {"tolerance", r.tolerance},
          {"within_tolerance", r.within_tolerance}};
}

void export_chain(const MHChain& chain, const std::filesystem::path& path) {
  const auto bin_name = path.stem().string() + ".bin";
  write_f64le(path.parent_path() / bin_name, chain.chain.samples);
  const nlohmann::json meta{{"schema_version", kSchemaVersion},
                            {"kind", "mh-chain"},
                            {"shape", chain.shape.describe()},
                            {"T", chain.chain.dim},
                            {"kept", chain.chain.kept},
                            {"flatten_order", kFlattenOrderTag},
                            {"dtype", "float64-le"},
                            {"prior", chain.prior},
                            {"seed", chain.seed},
                            {"acceptance_rate", chain.chain.acceptance_rate},
                            {"burn_in_acceptance", chain.chain.burn_in_acceptance},
                            {"proposal_sd", chain.chain.proposal_sd},
                            {"samples_file", bin_name}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << meta.dump(2) << '\n';
}

}  // namespace besovnet
