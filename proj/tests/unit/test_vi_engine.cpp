#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "besovnet/vi_engine.hpp"
#include "finite_difference.hpp"

using namespace besovnet;
using besovnet::testing::central_difference;
using besovnet::testing::relative_error;

namespace {

Dataset noisy_data(std::size_t n, std::uint64_t seed) {
  return generate_dataset(TrueFunction::log_singular(), n, 0.1, seed);
}

VariationalState random_state(const NetworkShape& shape, std::uint64_t seed) {
  auto s = VariationalState::initialize(shape, seed, 0.1);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-3.0, -1.0);
  for (double& r : s.rho) r = u(rng);
  return s;
}

std::vector<double> standard_normals(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (double& x : v) x = z(rng);
  return v;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("besovnet_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Softplus, RoundTripAndStability) {
  for (double s : {1e-8, 1e-2, 0.5, 3.0, 50.0}) EXPECT_NEAR(softplus(softplus_inverse(s)), s, 1e-12 * std::max(1.0, s));
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_GT(softplus(-50.0), 0.0);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-16);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
}

TEST(VariationalState, InitializationScales) {
  const auto shape = NetworkShape::uniform(1, 2, 32);
  const auto s = VariationalState::initialize(shape, 7);
  EXPECT_EQ(s.size(), shape.parameter_count());
  for (double sd : s.sigma()) EXPECT_NEAR(sd, 1e-2, 1e-12);
  // Coordinates of the 32 x 32 block have fan-in 32.
  const ParameterLayout layout(shape);
  double ss = 0.0;
  const std::size_t off = layout.weight_offset(1);
  for (std::size_t i = 0; i < 32 * 32; ++i) ss += s.mu[off + i] * s.mu[off + i];
  EXPECT_NEAR(ss / 1024.0, 1.0 / 32.0, 3 * std::sqrt(2.0 / 1024) / 32.0);
  EXPECT_NO_THROW(s.validate());
  auto bad = s;
  bad.rho.pop_back();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(VariationalState, ReparameterizationMoments) {
  const NetworkShape shape{1, {1}};
  VariationalState s;
  s.shape = shape;
  s.mu = {0.3, -1.0, 2.0, 0.0};
  s.rho = {softplus_inverse(0.1), softplus_inverse(1.0), softplus_inverse(0.5), softplus_inverse(2.0)};
  const std::size_t draws = 100000;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<double> sum(4, 0.0), sum2(4, 0.0), zeta(4), theta(4);
  for (std::size_t k = 0; k < draws; ++k) {
    for (double& v : zeta) v = z(rng);
    s.reparameterize(zeta, theta);
    for (std::size_t i = 0; i < 4; ++i) {
      sum[i] += theta[i];
      sum2[i] += theta[i] * theta[i];
    }
  }
  const auto sd = s.sigma();
  for (std::size_t i = 0; i < 4; ++i) {
    const double m = sum[i] / draws;
    const double v = sum2[i] / draws - m * m;
    EXPECT_NEAR(m, s.mu[i], 3 * sd[i] / std::sqrt(static_cast<double>(draws)));
    EXPECT_NEAR(v, sd[i] * sd[i], 3 * sd[i] * sd[i] * std::sqrt(2.0 / draws));
  }
}

TEST(Elbo, GaussianKlMatchesClosedForm) {
  // q = N(1, 0.5^2) per coordinate against N(0, 1): KL = 0.5 (0.25 + 1 - 1 - log 0.25).
  const NetworkShape shape{1, {1}};
  VariationalState s;
  s.shape = shape;
  s.mu.assign(4, 1.0);
  s.rho.assign(4, softplus_inverse(0.5));
  const DiagonalGaussianPrior prior(std::vector<double>(4, 0.0), std::vector<double>(4, 1.0));
  const auto e = elbo_estimate(s, Dataset{}, prior, 0.1, 10000, 11);
  EXPECT_NEAR(e.kl, 4 * 0.81814718055994531, 3 * e.kl_std_error);
  EXPECT_EQ(e.data_term, 0.0);
}

TEST(Elbo, KlOfDistributionWithItselfIsZero) {
  const auto shape = NetworkShape::uniform(1, 1, 3);
  const auto s = random_state(shape, 4);
  const DiagonalGaussianPrior prior(s.mu, s.sigma());
  const auto e = elbo_estimate(s, Dataset{}, prior, 0.1, 2000, 5);
  EXPECT_NEAR(e.kl, 0.0, std::max(3 * e.kl_std_error, 1e-9));
}

TEST(Elbo, FlatPriorLeavesOnlyEntropy) {
  const auto shape = NetworkShape::uniform(1, 1, 3);
  const auto s = random_state(shape, 6);
  const auto data = noisy_data(30, 1);
  const auto e = elbo_estimate(s, data, FlatPrior{}, 0.1, 10000, 7);
  double entropy = 0.0;
  for (double sd : s.sigma()) entropy += std::log(sd) + 0.5 * (1.0 + std::log(2.0 * M_PI));
  EXPECT_NEAR(e.value - e.data_term, entropy, 3 * e.kl_std_error + 1e-9);
  EXPECT_NEAR(e.kl, -entropy, 3 * e.kl_std_error + 1e-9);
}

TEST(Elbo, PerfectFitDataTerm) {
  // f(x) = x on noiseless data, sigma_q -> 0.
  const NetworkShape shape{1, {1}};
  VariationalState s;
  s.shape = shape;
  s.mu = {1.0, 0.0, 1.0, 0.0};
  s.rho.assign(4, -60.0);
  Dataset data;
  for (int i = 1; i <= 20; ++i) {
    data.x.push_back(i / 20.0);
    data.y.push_back(i / 20.0);
  }
  const double sigma = 0.2;
  const auto e = elbo_estimate(s, data, FlatPrior{}, sigma, 10, 1);
  EXPECT_NEAR(e.data_term, 20 * std::log(1.0 / (sigma * std::sqrt(2 * M_PI))), 1e-9);
}

TEST(Elbo, DeterministicInSeed) {
  const auto shape = NetworkShape::uniform(1, 2, 4);
  const auto s = random_state(shape, 2);
  const auto data = noisy_data(20, 2);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  EXPECT_EQ(elbo_estimate(s, data, prior, 0.1, 50, 9).value, elbo_estimate(s, data, prior, 0.1, 50, 9).value);
}

class FrozenGradient : public ::testing::TestWithParam<int> {};

TEST_P(FrozenGradient, MatchesCentralDifferences) {
  const int depth = GetParam();
  const auto shape = NetworkShape::uniform(1, depth, 4);
  const auto state = random_state(shape, 40 + depth);
  const auto data = noisy_data(25, depth);
  MixturePriorSpec m;
  m.pi1 = 0.7;
  m.pi2 = 0.3;
  m.log_sigma1 = std::log(0.05);
  m.sigma2 = 1.0;
  const ProductPrior prior(std::make_shared<GaussianMixtureDensity>(m));
  const auto zeta = standard_normals(state.size(), 17 + depth);
  const double weight = 2.0;
  const auto g = frozen_gradient(state, data, prior, 0.1, zeta, weight);
  EXPECT_NEAR(g.objective, frozen_objective(state, data, prior, 0.1, zeta, weight), 1e-9 * std::abs(g.objective));

  std::mt19937_64 rng(depth);
  std::vector<std::size_t> idx(state.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<std::size_t>(20, idx.size()));
  for (std::size_t i : idx) {
    auto f_mu = [&](const std::vector<double>& mu) {
      auto s = state;
      s.mu = mu;
      return frozen_objective(s, data, prior, 0.1, zeta, weight);
    };
    auto f_rho = [&](const std::vector<double>& rho) {
      auto s = state;
      s.rho = rho;
      return frozen_objective(s, data, prior, 0.1, zeta, weight);
    };
    EXPECT_LT(relative_error(g.mu[i], central_difference(f_mu, state.mu, i)), 1e-5) << "mu " << i;
    EXPECT_LT(relative_error(g.rho[i], central_difference(f_rho, state.rho, i)), 1e-5) << "rho " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Depths, FrozenGradient, ::testing::Values(1, 2, 3, 4));

TEST(Elbo, EntropyDerivative) {
  // No data and a flat prior: the objective is the entropy plus a zeta term,
  // so d/d rho = sigmoid(rho) / softplus(rho) exactly, and d/d mu = 0.
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const auto state = random_state(shape, 3);
  const auto zeta = standard_normals(state.size(), 1);
  const auto g = frozen_gradient(state, Dataset{}, FlatPrior{}, 0.1, zeta);
  for (std::size_t i = 0; i < state.size(); ++i) {
    EXPECT_NEAR(g.rho[i], sigmoid(state.rho[i]) / softplus(state.rho[i]), 1e-12);
    EXPECT_EQ(g.mu[i], 0.0);
  }
}

TEST(Elbo, GradientAgainstItselfIsNoise) {
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const auto state = random_state(shape, 5);
  const DiagonalGaussianPrior prior(state.mu, state.sigma());
  const int seeds = 1000;
  std::vector<double> sum(state.size(), 0.0), sum2(state.size(), 0.0);
  for (int k = 0; k < seeds; ++k) {
    const auto g = elbo_gradient(state, Dataset{}, prior, 0.1, 1, static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < state.size(); ++i) {
      sum[i] += g.mu[i];
      sum2[i] += g.mu[i] * g.mu[i];
    }
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double m = sum[i] / seeds;
    const double se = std::sqrt((sum2[i] / seeds - m * m) / seeds);
    EXPECT_NEAR(m, 0.0, 3 * se) << i;
  }
}

TEST(Train, ConstantTargetIsRecovered) {
  const auto data = generate_dataset(TrueFunction::constant(0.5), 200, 0.1, 12);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  TrainConfig cfg;
  cfg.seed = 3;
  const auto result = train(NetworkShape::uniform(1, 1, 4), data, prior, cfg);
  EXPECT_EQ(result.elbo_trace.size(), static_cast<std::size_t>(cfg.iterations));
  const auto pred = posterior_predictive(result.state, data.x, 500, TrueFunction::constant(0.5), data, 0.05, 4);
  EXPECT_LT(pred.posterior_mean_error, 0.05);
}

TEST(Train, DeterministicPerSeed) {
  const auto data = noisy_data(60, 3);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.batch_size = 16;
  cfg.seed = 8;
  const auto a = train(NetworkShape::uniform(1, 2, 6), data, prior, cfg);
  const auto b = train(NetworkShape::uniform(1, 2, 6), data, prior, cfg);
  EXPECT_EQ(a.state.mu, b.state.mu);
  EXPECT_EQ(a.state.rho, b.state.rho);
  EXPECT_EQ(a.elbo_trace, b.elbo_trace);
  EXPECT_EQ(a.state.step, 200);
}

TEST(Train, SgdOptimizerRuns) {
  const auto data = noisy_data(40, 4);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  TrainConfig cfg;
  cfg.iterations = 50;
  cfg.optimizer = Optimizer::Sgd;
  cfg.learning_rate = 1e-5;
  const auto r = train(NetworkShape::uniform(1, 1, 3), data, prior, cfg);
  for (double v : r.elbo_trace) EXPECT_TRUE(std::isfinite(v));
}

TEST(Train, DivergenceIsReported) {
  const auto data = noisy_data(40, 4);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  TrainConfig cfg;
  cfg.iterations = 500;
  cfg.optimizer = Optimizer::Sgd;
  cfg.learning_rate = 1e8;
  EXPECT_THROW(train(NetworkShape::uniform(1, 2, 8), data, prior, cfg), TrainingDivergence);
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.mc_samples = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Predictive, CollapsedPosterior) {
  const auto shape = NetworkShape::uniform(1, 2, 3);
  auto s = VariationalState::initialize(shape, 1);
  s.rho.assign(s.size(), -80.0);
  const auto data = noisy_data(10, 1);
  std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  const auto p = posterior_predictive(s, grid, 50, TrueFunction::log_singular(), data, 0.05, 2);
  const auto f = forward_batch(shape, s.mu, grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_NEAR(p.mean[j], f(static_cast<Eigen::Index>(j)), 1e-12);
    EXPECT_NEAR(p.lower[j], p.mean[j], 1e-12);
    EXPECT_NEAR(p.upper[j], p.mean[j], 1e-12);
  }
  for (double e : p.errors) EXPECT_NEAR(e, p.errors.front(), 1e-12);
}

TEST(Predictive, LinearRegionPushforward) {
  // One hidden unit kept active on [0, 1]: E[f(x)] = mu_w2 (mu_w1 x + mu_b1) + mu_b2.
  const NetworkShape shape{1, {1}};
  VariationalState s;
  s.shape = shape;
  s.mu = {1.0, 1.0, 0.8, -0.2};
  s.rho.assign(4, softplus_inverse(0.05));
  const std::vector<double> grid{0.0, 0.3, 0.6, 1.0};
  const auto p = posterior_predictive(s, grid, 4000, TrueFunction::constant(0.0), Dataset{}, 0.05, 6);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double analytic = 0.8 * (grid[j] + 1.0) - 0.2;
    EXPECT_NEAR(p.mean[j], analytic, 3 * p.sd[j] / std::sqrt(4000.0)) << grid[j];
    EXPECT_LE(p.lower[j], p.upper[j]);
    EXPECT_LT(p.lower_sd[j], p.upper_sd[j]);
  }
}

TEST(Predictive, ErrorsNonnegativeAndSeeded) {
  const auto shape = NetworkShape::uniform(1, 1, 4);
  const auto s = random_state(shape, 9);
  const auto data = noisy_data(30, 5);
  const auto grid = std::vector<double>{0.1, 0.9};
  const auto a = posterior_predictive(s, grid, 20, TrueFunction::log_singular(), data, 0.1, 3);
  const auto b = posterior_predictive(s, grid, 20, TrueFunction::log_singular(), data, 0.1, 3);
  EXPECT_EQ(a.errors, b.errors);
  EXPECT_EQ(a.mean, b.mean);
  for (double e : a.errors) EXPECT_GE(e, 0.0);
  EXPECT_THROW(posterior_predictive(s, grid, 1, TrueFunction::log_singular(), data, 0.1, 3), std::invalid_argument);
}

TEST(Predictive, EmpiricalQuantile) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({0, 10}, 0.25), 2.5);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = scratch_dir("checkpoint");
  auto s = random_state(NetworkShape::uniform(1, 2, 5), 13);
  s.step = 321;
  s.seed = 99;
  const auto path = dir / "ckpt.json";
  save_checkpoint(s, path);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt.mu.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt.rho.bin"));
  EXPECT_EQ(std::filesystem::file_size(dir / "ckpt.mu.bin"), s.size() * 8);
  std::ifstream is(path);
  const auto j = nlohmann::json::parse(is);
  EXPECT_EQ(j.at("schema_version"), kSchemaVersion);
  EXPECT_EQ(j.at("flatten_order"), kFlattenOrderTag);
  EXPECT_EQ(j.at("shape"), "1-5-5-1");
  EXPECT_EQ(j.at("T"), s.size());
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.shape, s.shape);
  EXPECT_EQ(back.mu, s.mu);
  EXPECT_EQ(back.rho, s.rho);
  EXPECT_EQ(back.step, s.step);
  EXPECT_EQ(back.seed, s.seed);
}

TEST(Checkpoint, RejectsTruncatedArrays) {
  const auto dir = scratch_dir("checkpoint_bad");
  const auto s = random_state(NetworkShape::uniform(1, 1, 3), 1);
  save_checkpoint(s, dir / "c.json");
  write_f64le(dir / "c.mu.bin", std::vector<double>{1.0, 2.0});
  EXPECT_ANY_THROW(load_checkpoint(dir / "c.json"));
}

TEST(Checkpoint, LittleEndianEncoding) {
  const auto dir = scratch_dir("f64");
  write_f64le(dir / "x.bin", std::vector<double>{1.0});
  std::ifstream is(dir / "x.bin", std::ios::binary);
  std::vector<unsigned char> bytes(8);
  is.read(reinterpret_cast<char*>(bytes.data()), 8);
  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(bytes, (std::vector<unsigned char>{0, 0, 0, 0, 0, 0, 0xF0, 0x3F}));
  EXPECT_EQ(read_f64le(dir / "x.bin"), std::vector<double>{1.0});
}
