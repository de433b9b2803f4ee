#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "besovnet/mh_oracle.hpp"

using namespace besovnet;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::vector<double> grid101() {
  std::vector<double> g(101);
  for (int i = 0; i <= 100; ++i) g[static_cast<std::size_t>(i)] = i / 100.0;
  return g;
}

}  // namespace

TEST(MHConfig, Validation) {
  MHConfig c;
  EXPECT_NO_THROW(c.validate());
  c.burn_in = c.steps;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.proposal_sd = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.burn_in = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Metropolis, RecoversPriorWithoutData) {
  const auto shape = NetworkShape::uniform(1, 1, 1);
  const std::vector<double> mean{0.5, -1.0, 0.0, 2.0};
  const std::vector<double> sd{1.0, 0.5, 2.0, 1.0};
  const DiagonalGaussianPrior prior(mean, sd);
  MHConfig cfg;
  cfg.steps = 60000;
  cfg.burn_in = 10000;
  cfg.proposal_sd = 0.5;
  cfg.seed = 3;
  const auto chain = mh_sample(shape, Dataset{}, prior, 0.1, cfg);
  EXPECT_EQ(chain.chain.kept, 50000u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto x = chain.chain.coordinate(i);
    const double ess = effective_sample_size(x);
    EXPECT_NEAR(mean_of(x), mean[i], 3 * sd[i] / std::sqrt(ess)) << i;
    EXPECT_NEAR(var_of(x), sd[i] * sd[i], 3 * sd[i] * sd[i] * std::sqrt(2.0 / ess)) << i;
  }
}

TEST(Metropolis, ConjugateNormalPosterior) {
  // theta ~ N(0, 1), y_i ~ N(theta, 1): posterior N(sum y / (n + 1), 1 / (n + 1)).
  const std::vector<double> y{0.8, 1.4, 0.3, 1.1, 0.9, 1.7, 0.2, 1.0, 1.3, 0.6};
  const double n = static_cast<double>(y.size());
  auto log_target = [&](const std::vector<double>& t) {
    double lp = -0.5 * t[0] * t[0];
    for (double v : y) lp -= 0.5 * (v - t[0]) * (v - t[0]);
    return lp;
  };
  MHConfig cfg;
  cfg.steps = 60000;
  cfg.burn_in = 5000;
  cfg.proposal_sd = 0.3;
  cfg.seed = 5;
  const auto c = random_walk_metropolis(log_target, {0.0}, cfg);
  const auto x = c.coordinate(0);
  const double post_mean = std::accumulate(y.begin(), y.end(), 0.0) / (n + 1);
  const double post_var = 1.0 / (n + 1);
  const double ess = effective_sample_size(x);
  EXPECT_NEAR(mean_of(x), post_mean, 3 * std::sqrt(post_var / ess));
  EXPECT_NEAR(var_of(x), post_var, 3 * post_var * std::sqrt(2.0 / ess));
  // Adaptation moves the post-burn-in acceptance toward the target.
  EXPECT_NEAR(c.acceptance_rate, 0.234, 0.1);
}

TEST(Metropolis, TwoPointDetailedBalance) {
  // Target pi = (0.3, 0.7) on {0, 1}; proposal picks either state with probability 1/2.
  const double pi[2] = {0.3, 0.7};
  auto log_target = [&](int s) { return std::log(pi[s]); };
  Rng rng(17);
  std::bernoulli_distribution coin(0.5);
  int state = 0;
  double logp = log_target(state);
  const int steps = 200000;
  double count[2] = {0, 0};
  double moves[2][2] = {{0, 0}, {0, 0}};
  for (int k = 0; k < steps; ++k) {
    const int from = state;
    metropolis_step(log_target, state, logp, coin(rng) ? 1 : 0, rng);
    count[from] += 1;
    moves[from][state] += 1;
  }
  const double p01 = moves[0][1] / count[0];
  const double p10 = moves[1][0] / count[1];
  // Exact kernel: P01 = 1/2, P10 = (1/2)(0.3/0.7).
  EXPECT_NEAR(p01, 0.5, 3 * std::sqrt(0.25 / count[0]));
  EXPECT_NEAR(p10, 0.5 * 0.3 / 0.7, 3 * std::sqrt(p10 * (1 - p10) / count[1]));
  const double flux = pi[0] * p01 - pi[1] * p10;
  const double se = std::sqrt(pi[0] * pi[0] * 0.25 / count[0] + pi[1] * pi[1] * p10 * (1 - p10) / count[1]);
  EXPECT_NEAR(flux, 0.0, 3 * se);
  EXPECT_NEAR(count[1] / steps, 0.7, 0.01);
}

TEST(Metropolis, TinyStepsAreAlwaysAccepted) {
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  const auto data = generate_dataset(TrueFunction::constant(0.5), 50, 0.1, 1);
  double previous = 0.0;
  for (double sd : {1e-2, 1e-4, 1e-7}) {
    MHConfig cfg;
    cfg.steps = 3000;
    cfg.burn_in = 0;
    cfg.adapt = false;
    cfg.proposal_sd = sd;
    const auto c = mh_sample(shape, data, prior, 0.1, cfg);
    EXPECT_GE(c.chain.acceptance_rate, previous - 0.02);
    previous = c.chain.acceptance_rate;
  }
  EXPECT_GT(previous, 0.99);
}

TEST(Metropolis, ParameterCap) {
  const auto big = NetworkShape::uniform(1, 2, 16);
  ASSERT_GT(big.parameter_count(), kMaxOracleParameters);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  EXPECT_THROW(mh_sample(big, Dataset{}, prior, 0.1, MHConfig{}), std::invalid_argument);
}

TEST(Metropolis, DeterministicPerSeed) {
  const auto shape = NetworkShape::uniform(1, 1, 3);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  const auto data = generate_dataset(TrueFunction::constant(0.2), 30, 0.1, 2);
  MHConfig cfg;
  cfg.steps = 2000;
  cfg.burn_in = 500;
  cfg.thin = 3;
  const auto a = mh_sample(shape, data, prior, 0.1, cfg);
  const auto b = mh_sample(shape, data, prior, 0.1, cfg);
  EXPECT_EQ(a.chain.samples, b.chain.samples);
  EXPECT_EQ(a.chain.kept, 500u);
}

TEST(Metropolis, InsensitiveToDataOrder) {
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  const auto data = generate_dataset(TrueFunction::constant(0.4), 40, 0.1, 6);
  Dataset reversed = data;
  std::reverse(reversed.x.begin(), reversed.x.end());
  std::reverse(reversed.y.begin(), reversed.y.end());
  MHConfig cfg;
  cfg.steps = 30000;
  cfg.burn_in = 5000;
  cfg.seed = 1;
  const auto a = mh_sample(shape, data, prior, 0.1, cfg);
  cfg.seed = 2;
  const auto b = mh_sample(shape, reversed, prior, 0.1, cfg);
  const auto g = grid101();
  const auto ma = chain_predictive_mean(a, g), mb = chain_predictive_mean(b, g);
  for (std::size_t j = 0; j < g.size(); j += 10) EXPECT_NEAR(ma[j], mb[j], 0.03) << g[j];
}

TEST(EffectiveSampleSize, IndependentAndAutoregressive) {
  Rng rng(4);
  std::normal_distribution<double> z;
  std::vector<double> iid(20000), ar(20000);
  double prev = 0.0;
  for (std::size_t i = 0; i < iid.size(); ++i) {
    iid[i] = z(rng);
    prev = 0.9 * prev + z(rng);
    ar[i] = prev;
  }
  EXPECT_NEAR(effective_sample_size(iid) / 20000.0, 1.0, 0.1);
  // AR(1) with phi = 0.9: integrated autocorrelation time (1 + phi) / (1 - phi) = 19.
  EXPECT_NEAR(effective_sample_size(ar) / (20000.0 / 19.0), 1.0, 0.25);
}

TEST(Compare, ChainAgainstItselfIsZero) {
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  MHConfig cfg;
  cfg.steps = 3000;
  cfg.burn_in = 1000;
  const auto chain = mh_sample(shape, generate_dataset(TrueFunction::constant(0.5), 20, 0.1, 1), prior, 0.1, cfg);
  const auto g = grid101();
  PredictiveSummary self;
  self.shape = shape.describe();
  self.grid = g;
  self.mean = chain_predictive_mean(chain, g);
  const auto r = compare_vi_mh(self, chain, g, 0.1);
  EXPECT_EQ(r.max_abs_diff, 0.0);
  EXPECT_TRUE(r.within_tolerance);
  EXPECT_EQ(to_json(r).at("schema_version"), kSchemaVersion);
}

TEST(Compare, MismatchedPriorIsFlagged) {
  const auto shape = NetworkShape::uniform(1, 1, 4);
  const auto data = generate_dataset(TrueFunction::constant(0.5), 200, 0.1, 8);
  const ProductPrior vi_prior(std::make_shared<GaussianDensity>(1.0));
  TrainConfig tc;
  tc.seed = 2;
  const auto vi = train(shape, data, vi_prior, tc);
  const auto g = grid101();
  const auto summary = posterior_predictive(vi.state, g, 200, TrueFunction::constant(0.5), data, 0.05, 3);
  // MH prior pins every parameter near -1, far from anything fitting the data.
  const auto T = shape.parameter_count();
  const DiagonalGaussianPrior pinned(std::vector<double>(T, -1.0), std::vector<double>(T, 1e-3));
  MHConfig cfg;
  cfg.steps = 4000;
  cfg.burn_in = 1000;
  cfg.proposal_sd = 1e-3;
  const auto chain = mh_sample(shape, data, pinned, 0.1, cfg, std::vector<double>(T, -1.0));
  const auto r = compare_vi_mh(summary, chain, g, 0.1);
  EXPECT_FALSE(r.within_tolerance);
  EXPECT_GT(r.max_abs_diff, 0.1);
}

TEST(Compare, ShapeAndGridMismatchThrow) {
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  MHConfig cfg;
  cfg.steps = 200;
  cfg.burn_in = 100;
  const auto chain = mh_sample(shape, Dataset{}, prior, 0.1, cfg);
  PredictiveSummary s;
  s.shape = "1-3-1";
  s.grid = grid101();
  s.mean.assign(101, 0.0);
  EXPECT_THROW(compare_vi_mh(s, chain, s.grid, 0.1), std::invalid_argument);
  s.shape = shape.describe();
  EXPECT_THROW(compare_vi_mh(s, chain, std::vector<double>{0.0, 1.0}, 0.1), std::invalid_argument);
}

TEST(Export, BinaryAndMetadata) {
  const auto dir = std::filesystem::temp_directory_path() / "besovnet_unit_chain";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto shape = NetworkShape::uniform(1, 1, 2);
  const ProductPrior prior(std::make_shared<GaussianDensity>(1.0));
  MHConfig cfg;
  cfg.steps = 300;
  cfg.burn_in = 100;
  const auto chain = mh_sample(shape, Dataset{}, prior, 0.1, cfg);
  export_chain(chain, dir / "chain.json");
  EXPECT_EQ(read_f64le(dir / "chain.bin"), chain.chain.samples);
  std::ifstream is(dir / "chain.json");
  const auto j = nlohmann::json::parse(is);
  EXPECT_EQ(j.at("kept"), 200);
  EXPECT_EQ(j.at("T"), shape.parameter_count());
  EXPECT_EQ(j.at("flatten_order"), kFlattenOrderTag);
}
