#pragma once

// Ground-truth Besov functions on [0,1], synthetic regression data, empirical
// norms and a grid-based modulus-of-smoothness / Besov-norm estimator.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace besovnet {

/// Devil's staircase, evaluated from the exact ternary expansion of the
/// double argument (first 64 digits, stopping at the first digit 1).
/// Throws std::domain_error outside [0, 1].
double eval_cantor(double x);

/// 1 / ln(x / 2) on (0, 1], 0 at x = 0. Throws std::domain_error outside [0, 1].
double eval_log_singular(double x);

enum class FunctionKind { Cantor, LogSingular, UserTabulated };

/// A true regression function on [0, 1]. Tabulated functions interpolate
/// linearly between knots.
class TrueFunction {
 public:
  static TrueFunction cantor();
  static TrueFunction log_singular();
  static TrueFunction tabulated(std::vector<double> knots, std::vector<double> values);
  static TrueFunction tabulate(const std::function<double(double)>& f, std::size_t points);
  static TrueFunction constant(double c);

  /// "f1", "f2" or "tabulated".
  static TrueFunction from_id(const std::string& id);

  FunctionKind kind() const { return kind_; }
  std::string id() const;
  int dim() const { return 1; }

  double operator()(double x) const;

 private:
  explicit TrueFunction(FunctionKind kind) : kind_(kind) {}

  FunctionKind kind_;
  std::vector<double> knots_;
  std::vector<double> values_;
};

struct Dataset {
  int d = 1;
  std::vector<double> x;  // row-major n x d
  std::vector<double> y;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return y.size(); }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(x).subspan(i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  }
};

/// x_i ~ U[0,1]^d, y_i = f(x_i) + N(0, noise_sd^2); one RNG stream per call.
Dataset generate_dataset(const TrueFunction& f, std::size_t n, double noise_sd, std::uint64_t seed);

/// sqrt(mean of squares). Throws std::invalid_argument on empty input.
double empirical_norm(std::span<const double> values);

/// Empirical distance ||f - f0||_n over the dataset design points.
double empirical_distance(std::span<const double> f_values, const TrueFunction& f0, const Dataset& data);

void write_dataset_csv(std::ostream& os, const Dataset& data);
Dataset read_dataset_csv(std::istream& is);
nlohmann::json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const nlohmann::json& j);

struct ModulusGrid {
  std::vector<double> t_grid;  // strictly increasing, positive
  int h_samples = 64;
  int x_samples = 512;

  /// 512 x-points, 64 shifts, 32 log-spaced t in [1e-3, 1].
  static ModulusGrid defaults();
  static ModulusGrid logarithmic(double t_min, double t_max, int t_points, int h_samples, int x_samples);
  void validate() const;
};

/// Lp norm on [0,1]: midpoint rule for p < inf, grid max (endpoints included) for p = inf.
double lp_norm(const TrueFunction& f, double p, int x_samples);

/// r-th modulus of smoothness w_{r,p}(f, t). The supremum runs over shifts
/// h = t k / h_samples and over every grid t' < t, so values are
/// nondecreasing along grid.t_grid.
double modulus_of_smoothness(const TrueFunction& f, int r, double p, double t, const ModulusGrid& grid);

/// w_{r,p}(f, t) at every point of grid.t_grid.
std::vector<double> modulus_profile(const TrueFunction& f, int r, double p, const ModulusGrid& grid);

/// ||f||_p plus the t-integral of (t^-s w_{r,p})^q dt/t restricted to the
/// t grid (trapezoid in log t), or its sup for q = inf; r = floor(s) + 1.
/// An approximation used for finiteness and stability checks only.
double besov_norm_estimate(const TrueFunction& f, double s, double p, double q, const ModulusGrid& grid);

}  // namespace besovnet
