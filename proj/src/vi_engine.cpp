#include "besovnet/vi_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "besovnet/normal.hpp"
#include "besovnet/parallel.hpp"
#include "besovnet/rng.hpp"

namespace besovnet {

double softplus(double rho) { return rho > 30.0 ? rho + std::log1p(std::exp(-rho)) : std::log1p(std::exp(rho)); }

double softplus_inverse(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("softplus_inverse: sigma must be positive");
  return sigma > 30.0 ? sigma + std::log(-std::expm1(-sigma)) : std::log(std::expm1(sigma));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------- state

VariationalState VariationalState::initialize(const NetworkShape& shape, std::uint64_t seed, double init_sigma_q) {
  const ParameterLayout layout(shape);
  VariationalState s;
  s.shape = shape;
  s.seed = seed;
  s.mu.resize(layout.size());
  s.rho.assign(layout.size(), softplus_inverse(init_sigma_q));
  Rng rng(seed);
  std::normal_distribution<double> z;
  for (std::size_t i = 0; i < s.mu.size(); ++i) s.mu[i] = z(rng) / std::sqrt(static_cast<double>(layout.fan_in(i)));
  return s;
}

std::vector<double> VariationalState::sigma() const {
  std::vector<double> out(rho.size());
  std::transform(rho.begin(), rho.end(), out.begin(), softplus);
  return out;
}

void VariationalState::validate() const {
  const auto T = shape.parameter_count();
  if (mu.size() != T || rho.size() != T) throw std::invalid_argument("variational state: lengths do not match the network");
  for (std::size_t i = 0; i < T; ++i) {
    if (!std::isfinite(mu[i]) || !(softplus(rho[i]) > 0.0)) {
      throw std::invalid_argument("variational state: non-finite mean or nonpositive scale");
    }
  }
}

void VariationalState::reparameterize(std::span<const double> zeta, std::span<double> theta) const {
  if (zeta.size() != mu.size() || theta.size() != mu.size()) throw std::invalid_argument("reparameterize: size mismatch");
  for (std::size_t i = 0; i < mu.size(); ++i) theta[i] = mu[i] + softplus(rho[i]) * zeta[i];
}

void TrainConfig::validate() const {
  if (iterations < 1 || mc_samples < 1 || batch_size < 0) throw std::invalid_argument("train config: counts must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (!(init_sigma_q > 0.0) || !(noise_sd > 0.0)) throw std::invalid_argument("train config: scales must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"mc_samples", c.mc_samples},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"seed", c.seed},
          {"init_sigma_q", c.init_sigma_q},
          {"noise_sd", c.noise_sd}};
}

// ---------------------------------------------------------------- objective

namespace {

void check_state(const VariationalState& state, const Dataset& data) {
  if (state.mu.size() != state.shape.parameter_count() || state.rho.size() != state.mu.size()) {
    throw std::invalid_argument("variational state: lengths do not match the network");
  }
  if (data.d != state.shape.d_in) throw std::invalid_argument("dataset dimension does not match the network");
}

void draw_normals(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> z;
  for (double& v : out) v = z(rng);
}

/// sum_i log q(theta_i) with theta = mu + sigma zeta.
double log_q(const VariationalState& state, std::span<const double> zeta) {
  double total = 0.0;
  for (std::size_t i = 0; i < zeta.size(); ++i) total += normal_log_pdf(zeta[i]) - std::log(softplus(state.rho[i]));
  return total;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double std_error_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ElboEstimate elbo_estimate(const VariationalState& state, const Dataset& data, const ParameterPrior& prior, double sigma,
                           int mc, std::uint64_t seed) {
  check_state(state, data);
  if (mc < 1) throw std::invalid_argument("elbo_estimate: mc must be >= 1");
  Rng rng(seed);
  const std::size_t T = state.size();
  std::vector<double> zeta(T), theta(T);
  std::vector<double> values(static_cast<std::size_t>(mc)), data_terms(values.size()), kls(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    draw_normals(rng, zeta);
    state.reparameterize(zeta, theta);
    data_terms[k] = loglik(state.shape, theta, data.x, data.y, sigma);
    kls[k] = log_q(state, zeta) - prior.log_density(theta);
    values[k] = data_terms[k] - kls[k];
  }
  ElboEstimate e;
  e.mc = mc;
  e.value = mean_of(values);
  e.std_error = std_error_of(values, e.value);
  e.data_term = mean_of(data_terms);
  e.kl = mean_of(kls);
  e.kl_std_error = std_error_of(kls, e.kl);
  return e;
}

double frozen_objective(const VariationalState& state, const Dataset& data, const ParameterPrior& prior, double sigma,
                        std::span<const double> zeta, double weight) {
  check_state(state, data);
  std::vector<double> theta(state.size());
  state.reparameterize(zeta, theta);
  return weight * loglik(state.shape, theta, data.x, data.y, sigma) + prior.log_density(theta) - log_q(state, zeta);
}

ElboGradient frozen_gradient(const VariationalState& state, const Dataset& data, const ParameterPrior& prior,
                             double sigma, std::span<const double> zeta, double weight) {
  check_state(state, data);
  const std::size_t T = state.size();
  std::vector<double> theta(T), g_lik(T), g_prior(T);
  state.reparameterize(zeta, theta);
  const double ll = loglik_and_grad(state.shape, theta, data.x, data.y, sigma, g_lik, weight);
  const double lp = prior.log_density_and_grad(theta, g_prior);
  ElboGradient out;
  out.objective = ll + lp - log_q(state, zeta);
  out.mu.resize(T);
  out.rho.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    const double g = g_lik[i] + g_prior[i];
    const double s = softplus(state.rho[i]);
    out.mu[i] = g;
    // d/d rho of [g-term through theta] + [-log q] = (g zeta + 1/s) * sigmoid(rho)
    out.rho[i] = (g * zeta[i] + 1.0 / s) * sigmoid(state.rho[i]);
  }
  return out;
}

ElboGradient elbo_gradient(const VariationalState& state, const Dataset& data, const ParameterPrior& prior, double sigma,
                           int mc, std::uint64_t seed) {
  if (mc < 1) throw std::invalid_argument("elbo_gradient: mc must be >= 1");
  Rng rng(seed);
  const std::size_t T = state.size();
  std::vector<double> zeta(T);
  ElboGradient acc;
  acc.mu.assign(T, 0.0);
  acc.rho.assign(T, 0.0);
  for (int k = 0; k < mc; ++k) {
    draw_normals(rng, zeta);
    const auto g = frozen_gradient(state, data, prior, sigma, zeta);
    acc.objective += g.objective / mc;
    for (std::size_t i = 0; i < T; ++i) {
      acc.mu[i] += g.mu[i] / mc;
      acc.rho[i] += g.rho[i] / mc;
    }
  }
  return acc;
}

// ---------------------------------------------------------------- training

namespace {

class AdamStep {
 public:
  AdamStep(std::size_t size, double lr) : lr_(lr), m_(size, 0.0), v_(size, 0.0) {}

  void ascend(std::span<double> params, std::span<const double> grad, std::int64_t t) {
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] += lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::vector<double> m_;
  std::vector<double> v_;
};

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainResult train(const NetworkShape& shape, const Dataset& data, const ParameterPrior& prior, const TrainConfig& config) {
  config.validate();
  return train(VariationalState::initialize(shape, derive_seed(config.seed, 0), config.init_sigma_q), data, prior, config);
}

TrainResult train(VariationalState state, const Dataset& data, const ParameterPrior& prior, const TrainConfig& config) {
  config.validate();
  check_state(state, data);
  const std::size_t n = data.size();
  const std::size_t T = state.size();
  const bool minibatch = config.batch_size > 0 && static_cast<std::size_t>(config.batch_size) < n;
  const double weight = minibatch ? static_cast<double>(n) / config.batch_size : 1.0;

  Rng rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> all_idx(n), batch_idx;
  std::iota(all_idx.begin(), all_idx.end(), std::size_t{0});
  Dataset batch;
  batch.d = data.d;
  batch.noise_sd = data.noise_sd;

  AdamStep adam_mu(T, config.learning_rate), adam_rho(T, config.learning_rate);
  std::vector<double> zeta(T), g_mu(T), g_rho(T);
  TrainResult result;
  result.elbo_trace.reserve(static_cast<std::size_t>(config.iterations));

  for (int it = 0; it < config.iterations; ++it) {
    const Dataset* current = &data;
    if (minibatch) {
      batch_idx.clear();
      std::sample(all_idx.begin(), all_idx.end(), std::back_inserter(batch_idx), config.batch_size, rng);
      batch.x.clear();
      batch.y.clear();
      for (std::size_t i : batch_idx) {
        const auto p = data.point(i);
        batch.x.insert(batch.x.end(), p.begin(), p.end());
        batch.y.push_back(data.y[i]);
      }
      current = &batch;
    }
    std::fill(g_mu.begin(), g_mu.end(), 0.0);
    std::fill(g_rho.begin(), g_rho.end(), 0.0);
    double objective = 0.0;
    for (int k = 0; k < config.mc_samples; ++k) {
      draw_normals(rng, zeta);
      const auto g = frozen_gradient(state, *current, prior, config.noise_sd, zeta, weight);
      objective += g.objective / config.mc_samples;
      for (std::size_t i = 0; i < T; ++i) {
        g_mu[i] += g.mu[i] / config.mc_samples;
        g_rho[i] += g.rho[i] / config.mc_samples;
      }
    }
    result.elbo_trace.push_back(objective);
    if (!std::isfinite(objective) || !all_finite(g_mu) || !all_finite(g_rho)) {
      std::ostringstream os;
      os << "training diverged at iteration " << it << " (objective " << objective << ")";
      throw TrainingDivergence(os.str(), it, result.elbo_trace);
    }
    ++state.step;
    if (config.optimizer == Optimizer::Adam) {
      adam_mu.ascend(state.mu, g_mu, state.step);
      adam_rho.ascend(state.rho, g_rho, state.step);
    } else {
      for (std::size_t i = 0; i < T; ++i) {
        state.mu[i] += config.learning_rate * g_mu[i];
        state.rho[i] += config.learning_rate * g_rho[i];
      }
    }
  }
  result.state = std::move(state);
  return result;
}

// ---------------------------------------------------------------- predictive

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: no values");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("empirical_quantile: prob outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PredictiveSummary posterior_predictive(const VariationalState& state, std::span<const double> grid, int draws,
                                       const TrueFunction& f0, const Dataset& data, double alpha, std::uint64_t seed) {
  check_state(state, data);
  if (draws < 2) throw std::invalid_argument("posterior_predictive: need at least 2 draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("posterior_predictive: alpha must lie in (0, 1)");
  if (state.shape.d_in != 1) throw std::invalid_argument("posterior_predictive: grid evaluation needs d_in = 1");

  const auto K = static_cast<std::size_t>(draws);
  const std::size_t G = grid.size();
  const std::size_t n = data.size();
  std::vector<std::vector<double>> on_grid(K), on_data(K);
  parallel_for(K, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    std::vector<double> zeta(state.size()), theta(state.size());
    draw_normals(rng, zeta);
    state.reparameterize(zeta, theta);
    const Eigen::VectorXd g = forward_batch(state.shape, theta, grid);
    on_grid[k].assign(g.data(), g.data() + g.size());
    if (n > 0) {
      const Eigen::VectorXd f = forward_batch(state.shape, theta, data.x);
      on_data[k].assign(f.data(), f.data() + f.size());
    }
  });

  PredictiveSummary s;
  s.shape = state.shape.describe();
  s.grid.assign(grid.begin(), grid.end());
  s.alpha = alpha;
  s.draws = draws;
  s.mean.resize(G);
  s.lower.resize(G);
  s.upper.resize(G);
  s.sd.resize(G);
  s.lower_sd.resize(G);
  s.upper_sd.resize(G);
  const double z = normal_inverse_survival(alpha / 2.0);
  std::vector<double> column(K);
  for (std::size_t j = 0; j < G; ++j) {
    for (std::size_t k = 0; k < K; ++k) column[k] = on_grid[k][j];
    const double m = mean_of(column);
    double ss = 0.0;
    for (double v : column) ss += (v - m) * (v - m);
    s.mean[j] = m;
    s.sd[j] = std::sqrt(ss / static_cast<double>(K - 1));
    s.lower[j] = empirical_quantile(column, alpha / 2.0);
    s.upper[j] = empirical_quantile(column, 1.0 - alpha / 2.0);
    s.lower_sd[j] = m - z * s.sd[j];
    s.upper_sd[j] = m + z * s.sd[j];
  }
  if (n > 0) {
    s.errors.resize(K);
    std::vector<double> mean_on_data(n, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      s.errors[k] = empirical_distance(on_data[k], f0, data);
      for (std::size_t i = 0; i < n; ++i) mean_on_data[i] += on_data[k][i] / static_cast<double>(K);
    }
    s.posterior_mean_error = empirical_distance(mean_on_data, f0, data);
  }
  return s;
}

// ---------------------------------------------------------------- checkpoints

void write_f64le(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<double> read_f64le(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> out;
  char buf[8];
  while (is.read(buf, 8)) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.push_back(std::bit_cast<double>(bits));
  }
  if (is.gcount() != 0) throw std::runtime_error(path.string() + ": length is not a multiple of 8 bytes");
  return out;
}

void save_checkpoint(const VariationalState& state, const std::filesystem::path& path) {
  state.validate();
  const auto stem = path.stem().string();
  const auto mu_name = stem + ".mu.bin";
  const auto rho_name = stem + ".rho.bin";
  write_f64le(path.parent_path() / mu_name, state.mu);
  write_f64le(path.parent_path() / rho_name, state.rho);
  const nlohmann::json envelope{{"schema_version", kSchemaVersion},
                                {"kind", "variational-state"},
                                {"shape", state.shape.describe()},
                                {"T", state.size()},
                                {"flatten_order", kFlattenOrderTag},
                                {"dtype", "float64-le"},
                                {"seed", state.seed},
                                {"step", state.step},
                                {"mu_file", mu_name},
                                {"rho_file", rho_name}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << envelope.dump(2) << '\n';
}

VariationalState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(is);
  if (j.at("schema_version").get<int>() != kSchemaVersion) throw std::runtime_error("checkpoint: unsupported schema version");
  if (j.at("flatten_order").get<std::string>() != kFlattenOrderTag) throw std::runtime_error("checkpoint: unknown flatten order");
  VariationalState s;
  s.shape = NetworkShape::parse(j.at("shape").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.step = j.at("step").get<std::int64_t>();
  s.mu = read_f64le(path.parent_path() / j.at("mu_file").get<std::string>());
  s.rho = read_f64le(path.parent_path() / j.at("rho_file").get<std::string>());
  if (s.mu.size() != j.at("T").get<std::size_t>()) throw std::runtime_error("checkpoint: T does not match stored arrays");
  s.validate();
  return s;
}

}  // namespace besovnet
