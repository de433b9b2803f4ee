#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "besovnet/besov_testbed.hpp"

using namespace besovnet;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(Cantor, Endpoints) {
  EXPECT_EQ(eval_cantor(0.0), 0.0);
  EXPECT_EQ(eval_cantor(1.0), 1.0);
}

TEST(Cantor, OneThirdAndOneQuarter) {
  // double(1/3) sits just below 1/3, so its ternary expansion is 0.0222...2(0|1)...
  EXPECT_NEAR(eval_cantor(1.0 / 3.0), 0.5, 1e-10);
  EXPECT_NEAR(eval_cantor(0.25), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(eval_cantor(2.0 / 3.0), 0.5);
}

TEST(Cantor, MatchesExactRationalExpansion) {
  // Reference values from an exact-rational ternary scan of the same doubles.
  const std::pair<double, double> cases[] = {
      {0.1, 0.20000000000982254}, {0.2, 0.25},  {0.7, 0.5999999999767169}, {0.9, 0.8000000000174623},
      {0.123456, 0.25},           {0.8, 0.75},  {1.0 / 3.0, 0.49999999997464784},
  };
  for (auto [x, expected] : cases) EXPECT_NEAR(eval_cantor(x), expected, 1e-15) << "x = " << x;
}

TEST(Cantor, MidpointIdentityAndMonotone) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(10000);
  for (double& x : xs) x = u(rng);
  for (double x : xs) EXPECT_NEAR(eval_cantor(x) + eval_cantor(1.0 - x), 1.0, 1e-12);
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_LE(eval_cantor(xs[i - 1]), eval_cantor(xs[i]));
}

TEST(Cantor, RejectsOutsideUnitInterval) {
  EXPECT_THROW(eval_cantor(-0.1), std::domain_error);
  EXPECT_THROW(eval_cantor(1.5), std::domain_error);
}

TEST(LogSingular, Values) {
  EXPECT_EQ(eval_log_singular(0.0), 0.0);
  EXPECT_NEAR(eval_log_singular(1.0), -1.4426950408889634, 1e-14);
  EXPECT_NEAR(eval_log_singular(0.5), -0.7213475204444817, 1e-14);
  EXPECT_THROW(eval_log_singular(2.0), std::domain_error);
}

TEST(Dataset, ZeroNoiseIsExact) {
  const auto f = TrueFunction::log_singular();
  const auto data = generate_dataset(f, 5, 0.0, 7);
  ASSERT_EQ(data.size(), 5u);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(data.y[i], f(data.x[i]));
}

TEST(Dataset, DeterministicPerSeed) {
  const auto f = TrueFunction::cantor();
  const auto a = generate_dataset(f, 100, 0.1, 1);
  const auto b = generate_dataset(f, 100, 0.1, 1);
  const auto c = generate_dataset(f, 100, 0.1, 2);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.y, c.y);
}

TEST(Dataset, NoiseVariance) {
  const auto f = TrueFunction::log_singular();
  const auto data = generate_dataset(f, 100000, 0.1, 3);
  double mean = 0.0;
  std::vector<double> r(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) mean += (r[i] = data.y[i] - f(data.x[i]));
  mean /= static_cast<double>(r.size());
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= static_cast<double>(r.size() - 1);
  EXPECT_GE(var, 0.0097);
  EXPECT_LE(var, 0.0103);
}

TEST(Dataset, CsvRoundTripIsBitExact) {
  const auto data = generate_dataset(TrueFunction::cantor(), 50, 0.1, 9);
  std::stringstream ss;
  write_dataset_csv(ss, data);
  EXPECT_EQ(ss.str().substr(0, 4), "x_1,");
  const auto back = read_dataset_csv(ss);
  EXPECT_EQ(back.x, data.x);
  EXPECT_EQ(back.y, data.y);
}

TEST(Dataset, JsonRoundTripIsBitExact) {
  const auto data = generate_dataset(TrueFunction::log_singular(), 20, 0.1, 4);
  const auto j = dataset_to_json(data);
  for (const char* key : {"d", "n", "seed", "noise_sd", "x", "y"}) EXPECT_TRUE(j.contains(key)) << key;
  const auto back = dataset_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.x, data.x);
  EXPECT_EQ(back.y, data.y);
  EXPECT_EQ(back.seed, data.seed);
  EXPECT_EQ(back.noise_sd, data.noise_sd);
}

TEST(EmpiricalNorm, Examples) {
  const std::vector<double> c(7, -2.5);
  EXPECT_NEAR(empirical_norm(c), 2.5, 1e-15);
  const std::vector<double> v{3.0, 4.0};
  EXPECT_NEAR(empirical_norm(v), std::sqrt(12.5), 1e-15);
  EXPECT_NEAR(empirical_norm(v), 3.5355, 1e-4);
  const std::vector<double> z(4, 0.0);
  EXPECT_EQ(empirical_norm(z), 0.0);
  EXPECT_THROW(empirical_norm(std::vector<double>{}), std::invalid_argument);
}

TEST(EmpiricalNorm, AbsoluteHomogeneity) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> v(100);
  for (double& x : v) x = z(rng);
  for (double a : {-3.0, 0.0, 0.25, 7.0}) {
    std::vector<double> w(v);
    for (double& x : w) x *= a;
    EXPECT_NEAR(empirical_norm(w), std::abs(a) * empirical_norm(v), 1e-12);
  }
}

TEST(EmpiricalDistance, InvariantToShuffling) {
  const auto f0 = TrueFunction::log_singular();
  auto data = generate_dataset(f0, 64, 0.1, 21);
  std::vector<double> fv(data.size());
  for (std::size_t i = 0; i < fv.size(); ++i) fv[i] = std::sin(data.x[i]);
  const double before = empirical_distance(fv, f0, data);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(2));
  Dataset shuffled = data;
  std::vector<double> fs(fv.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.x[i] = data.x[perm[i]];
    shuffled.y[i] = data.y[perm[i]];
    fs[i] = fv[perm[i]];
  }
  EXPECT_NEAR(empirical_distance(fs, f0, shuffled), before, 1e-14);
}

TEST(Modulus, ConstantIsZero) {
  const auto c = TrueFunction::constant(1.7);
  const auto grid = ModulusGrid::defaults();
  for (double p : {1.0, 2.0, kInf}) EXPECT_EQ(modulus_of_smoothness(c, 1, p, 0.3, grid), 0.0);
}

TEST(Modulus, AffineSecondDifferenceVanishes) {
  const auto f = TrueFunction::tabulate([](double x) { return x; }, 2);
  EXPECT_NEAR(modulus_of_smoothness(f, 2, kInf, 0.1, ModulusGrid::defaults()), 0.0, 1e-14);
}

TEST(Modulus, SquareFirstDifference) {
  // sup over x + h <= 1, h <= 0.1 of |2xh + h^2| is 0.19 at x = 0.9; the
  // default 512-point x grid reaches x = 459/511.
  const auto f = TrueFunction::tabulate([](double x) { return x * x; }, 20001);
  const double w = modulus_of_smoothness(f, 1, kInf, 0.1, ModulusGrid::defaults());
  EXPECT_NEAR(w, 0.19, 2e-3);
  EXPECT_LE(w, 0.19 + 1e-9);
}

TEST(Modulus, NondecreasingInT) {
  const auto grid = ModulusGrid::defaults();
  for (const auto& f : {TrueFunction::cantor(), TrueFunction::log_singular()}) {
    const auto prof = modulus_profile(f, 2, 1.0, grid);
    ASSERT_EQ(prof.size(), grid.t_grid.size());
    for (std::size_t i = 1; i < prof.size(); ++i) EXPECT_LE(prof[i - 1], prof[i]);
  }
}

TEST(BesovEstimate, ConstantGivesSupNorm) {
  const auto c = TrueFunction::constant(-0.8);
  EXPECT_NEAR(besov_norm_estimate(c, 1.0, kInf, kInf, ModulusGrid::defaults()), 0.8, 1e-15);
}

TEST(BesovEstimate, IdentityGivesL1Norm) {
  const auto f = TrueFunction::tabulate([](double x) { return x; }, 2);
  EXPECT_NEAR(besov_norm_estimate(f, 1.5, 1.0, 1.0, ModulusGrid::defaults()), 0.5, 1e-9);
}

TEST(BesovEstimate, CantorFiniteAndStableUnderRefinement) {
  const double s = std::log(2.0) / std::log(3.0);
  const auto coarse = ModulusGrid::defaults();
  const auto fine = ModulusGrid::logarithmic(1e-3, 1.0, 64, 128, 1024);
  const auto f = TrueFunction::cantor();
  const double a = besov_norm_estimate(f, s, kInf, kInf, coarse);
  const double b = besov_norm_estimate(f, s, kInf, kInf, fine);
  ASSERT_TRUE(std::isfinite(a));
  ASSERT_TRUE(std::isfinite(b));
  EXPECT_LT(std::abs(a - b) / b, 0.10);
}

TEST(ModulusGrid, Validation) {
  EXPECT_NO_THROW(ModulusGrid::defaults().validate());
  ModulusGrid bad = ModulusGrid::defaults();
  std::reverse(bad.t_grid.begin(), bad.t_grid.end());
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = ModulusGrid::defaults();
  bad.h_samples = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}
