#include "besovnet/besov_testbed.hpp"

#include "besovnet/format.hpp"
#include "besovnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace besovnet {

namespace {

constexpr int kCantorDigits = 64;

void require_unit_interval(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error(std::string(what) + ": argument outside [0, 1]");
  }
}

// Ternary digit scan of r / 2^E where r < 2^E fits in 128 bits.
double cantor_scan_narrow(std::uint64_t mantissa, int exponent) {
  using u128 = unsigned __int128;
  const u128 one = 1;
  const u128 mask = (one << exponent) - 1;
  u128 r = mantissa;
  std::uint64_t bits = 0;
  for (int k = 0; k < kCantorDigits; ++k) {
    r *= 3;
    const auto digit = static_cast<unsigned>(r >> exponent);
    r &= mask;
    const std::uint64_t bit = std::uint64_t{1} << (63 - k);
    if (digit == 1) return std::ldexp(static_cast<double>(bits | bit), -64);
    if (digit == 2) bits |= bit;
  }
  return std::ldexp(static_cast<double>(bits), -64);
}

// Same scan with a little-endian multiword accumulator, for tiny arguments.
double cantor_scan_wide(std::uint64_t mantissa, int exponent) {
  const std::size_t words = static_cast<std::size_t>(exponent) / 64 + 2;
  std::vector<std::uint64_t> r(words, 0);
  r[0] = mantissa;
  const std::size_t top_word = static_cast<std::size_t>(exponent) / 64;
  const int top_shift = exponent % 64;
  auto bit_at = [&](int pos) {
    return (r[static_cast<std::size_t>(pos) / 64] >> (pos % 64)) & 1U;
  };
  std::uint64_t bits = 0;
  for (int k = 0; k < kCantorDigits; ++k) {
    unsigned __int128 carry = 0;
    for (auto& w : r) {
      const unsigned __int128 prod = static_cast<unsigned __int128>(w) * 3 + carry;
      w = static_cast<std::uint64_t>(prod);
      carry = prod >> 64;
    }
    const unsigned digit = static_cast<unsigned>(bit_at(exponent) | (bit_at(exponent + 1) << 1));
    // Clear everything at or above bit `exponent`.
    r[top_word] &= (top_shift == 0) ? 0 : ((std::uint64_t{1} << top_shift) - 1);
    for (std::size_t w = top_word + 1; w < words; ++w) r[w] = 0;
    const std::uint64_t bit = std::uint64_t{1} << (63 - k);
    if (digit == 1) return std::ldexp(static_cast<double>(bits | bit), -64);
    if (digit == 2) bits |= bit;
  }
  return std::ldexp(static_cast<double>(bits), -64);
}

double interpolate(const std::vector<double>& knots, const std::vector<double>& values, double x) {
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  if (it == knots.begin()) return values.front();
  if (it == knots.end()) return values.back();
  const auto hi = static_cast<std::size_t>(it - knots.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - knots[lo]) / (knots[hi] - knots[lo]);
  return values[lo] + w * (values[hi] - values[lo]);
}

double binomial(int r, int j) {
  double c = 1.0;
  for (int i = 1; i <= j; ++i) c = c * (r - j + i) / i;
  return c;
}

double finite_difference(const TrueFunction& f, int r, double x, double h) {
  double sum = 0.0;
  for (int j = 0; j <= r; ++j) {
    const double sign = ((r - j) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * binomial(r, j) * f(std::min(1.0, x + j * h));
  }
  return sum;
}

// ||Delta_h^r f||_p on the grid; zero wherever x + r h leaves [0, 1].
double difference_norm(const TrueFunction& f, int r, double p, double h, int x_samples) {
  const int m = x_samples;
  if (std::isinf(p)) {
    double best = 0.0;
    for (int i = 0; i < m; ++i) {
      const double x = (m == 1) ? 0.0 : static_cast<double>(i) / (m - 1);
      if (x + r * h > 1.0) break;
      best = std::max(best, std::abs(finite_difference(f, r, x, h)));
    }
    return best;
  }
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double x = (i + 0.5) / m;
    if (x + r * h > 1.0) break;
    sum += std::pow(std::abs(finite_difference(f, r, x, h)), p);
  }
  return std::pow(sum / m, 1.0 / p);
}

double modulus_at(const TrueFunction& f, int r, double p, double t, const ModulusGrid& grid) {
  double best = 0.0;
  for (int k = 1; k <= grid.h_samples; ++k) {
    const double h = t * k / grid.h_samples;
    best = std::max(best, difference_norm(f, r, p, h, grid.x_samples));
  }
  return best;
}

void validate_modulus_args(int r, double p, double t) {
  if (r < 1) throw std::invalid_argument("modulus_of_smoothness: r must be >= 1");
  if (!(p > 0.0)) throw std::invalid_argument("modulus_of_smoothness: p must be positive");
  if (!(t > 0.0) || std::isnan(t)) throw std::invalid_argument("modulus_of_smoothness: t must be positive");
}

}  // namespace

double eval_cantor(double x) {
  require_unit_interval(x, "eval_cantor");
  if (x == 1.0) return 1.0;
  if (x == 0.0) return 0.0;
  int e2 = 0;
  const double frac = std::frexp(x, &e2);  // x = frac * 2^e2, frac in [0.5, 1)
  auto mantissa = static_cast<std::uint64_t>(std::ldexp(frac, 53));
  int exponent = 53 - e2;
  while ((mantissa & 1U) == 0 && exponent > 0) {
    mantissa >>= 1;
    --exponent;
  }
  if (exponent <= 125) return cantor_scan_narrow(mantissa, exponent);
  return cantor_scan_wide(mantissa, exponent);
}

double eval_log_singular(double x) {
  require_unit_interval(x, "eval_log_singular");
  if (x == 0.0) return 0.0;
  return 1.0 / std::log(x / 2.0);
}

TrueFunction TrueFunction::cantor() { return TrueFunction(FunctionKind::Cantor); }

TrueFunction TrueFunction::log_singular() { return TrueFunction(FunctionKind::LogSingular); }

TrueFunction TrueFunction::tabulated(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() < 2 || knots.size() != values.size()) {
    throw std::invalid_argument("TrueFunction::tabulated: need >= 2 knots with matching values");
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] > knots[i - 1])) throw std::invalid_argument("TrueFunction::tabulated: knots must increase");
  }
  if (knots.front() > 0.0 || knots.back() < 1.0) {
    throw std::invalid_argument("TrueFunction::tabulated: knots must cover [0, 1]");
  }
  TrueFunction f(FunctionKind::UserTabulated);
  f.knots_ = std::move(knots);
  f.values_ = std::move(values);
  return f;
}

TrueFunction TrueFunction::tabulate(const std::function<double(double)>& fn, std::size_t points) {
  if (points < 2) throw std::invalid_argument("TrueFunction::tabulate: need >= 2 points");
  std::vector<double> knots(points);
  std::vector<double> values(points);
  for (std::size_t i = 0; i < points; ++i) {
    knots[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    values[i] = fn(knots[i]);
  }
  return tabulated(std::move(knots), std::move(values));
}

TrueFunction TrueFunction::constant(double c) { return tabulated({0.0, 1.0}, {c, c}); }

TrueFunction TrueFunction::from_id(const std::string& id) {
  if (id == "f1" || id == "cantor") return cantor();
  if (id == "f2" || id == "log-singular") return log_singular();
  throw std::invalid_argument("unknown function id '" + id + "' (expected f1 or f2)");
}

std::string TrueFunction::id() const {
  switch (kind_) {
    case FunctionKind::Cantor:
      return "f1";
    case FunctionKind::LogSingular:
      return "f2";
    case FunctionKind::UserTabulated:
      break;
  }
  return "tabulated";
}

double TrueFunction::operator()(double x) const {
  switch (kind_) {
    case FunctionKind::Cantor:
      return eval_cantor(x);
    case FunctionKind::LogSingular:
      return eval_log_singular(x);
    case FunctionKind::UserTabulated:
      break;
  }
  require_unit_interval(x, "TrueFunction");
  return interpolate(knots_, values_, x);
}

Dataset generate_dataset(const TrueFunction& f, std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("generate_dataset: noise_sd must be >= 0");
  Dataset data;
  data.d = f.dim();
  data.noise_sd = noise_sd;
  data.seed = seed;
  data.x.resize(n * static_cast<std::size_t>(data.d));
  data.y.resize(n);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& xi : data.x) xi = unit(rng);
  for (std::size_t i = 0; i < n; ++i) data.y[i] = f(data.x[i]) + noise_sd * gauss(rng);
  return data;
}

double empirical_norm(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empirical_norm: empty input");
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum / static_cast<double>(values.size()));
}

double empirical_distance(std::span<const double> f_values, const TrueFunction& f0, const Dataset& data) {
  if (f_values.size() != data.size()) throw std::invalid_argument("empirical_distance: size mismatch");
  std::vector<double> diff(f_values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f_values[i] - f0(data.x[i * static_cast<std::size_t>(data.d)]);
  return empirical_norm(diff);
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  for (int j = 0; j < data.d; ++j) os << "x_" << (j + 1) << ',';
  os << "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double xi : data.point(i)) os << format_double(xi) << ',';
    os << format_double(data.y[i]) << '\n';
  }
}

Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_dataset_csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Dataset data;
  data.d = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (data.d < 1 || line.substr(line.rfind(',') + 1) != "y") {
    throw std::runtime_error("read_dataset_csv: header must be x_1..x_d,y");
  }
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(parse_double(cell));
    if (cells.size() != static_cast<std::size_t>(data.d) + 1) throw std::runtime_error("read_dataset_csv: ragged row");
    data.x.insert(data.x.end(), cells.begin(), cells.end() - 1);
    data.y.push_back(cells.back());
  }
  return data;
}

nlohmann::json dataset_to_json(const Dataset& data) {
  return nlohmann::json{{"d", data.d},         {"n", data.size()}, {"seed", data.seed},
                        {"noise_sd", data.noise_sd}, {"x", data.x},      {"y", data.y}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset data;
  data.d = j.at("d").get<int>();
  data.seed = j.at("seed").get<std::uint64_t>();
  data.noise_sd = j.at("noise_sd").get<double>();
  data.x = j.at("x").get<std::vector<double>>();
  data.y = j.at("y").get<std::vector<double>>();
  const auto n = j.at("n").get<std::size_t>();
  if (data.y.size() != n || data.x.size() != n * static_cast<std::size_t>(data.d)) {
    throw std::runtime_error("dataset_from_json: inconsistent sizes");
  }
  return data;
}

ModulusGrid ModulusGrid::defaults() { return logarithmic(1e-3, 1.0, 32, 64, 512); }

ModulusGrid ModulusGrid::logarithmic(double t_min, double t_max, int t_points, int h_samples, int x_samples) {
  ModulusGrid grid;
  grid.h_samples = h_samples;
  grid.x_samples = x_samples;
  grid.t_grid.resize(static_cast<std::size_t>(t_points));
  const double lo = std::log(t_min);
  const double hi = std::log(t_max);
  for (int i = 0; i < t_points; ++i) {
    grid.t_grid[static_cast<std::size_t>(i)] =
        (t_points == 1) ? t_max : std::exp(lo + (hi - lo) * i / (t_points - 1));
  }
  grid.validate();
  return grid;
}

void ModulusGrid::validate() const {
  if (t_grid.empty() || h_samples < 1 || x_samples < 1) throw std::invalid_argument("ModulusGrid: counts must be >= 1");
  if (!(t_grid.front() > 0.0)) throw std::invalid_argument("ModulusGrid: t must be positive");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("ModulusGrid: t_grid must be strictly increasing");
  }
}

double lp_norm(const TrueFunction& f, double p, int x_samples) {
  if (!(p > 0.0)) throw std::invalid_argument("lp_norm: p must be positive");
  if (x_samples < 1) throw std::invalid_argument("lp_norm: need >= 1 sample");
  const int m = x_samples;
  if (std::isinf(p)) {
    double best = 0.0;
    for (int i = 0; i < m; ++i) best = std::max(best, std::abs(f(m == 1 ? 0.0 : static_cast<double>(i) / (m - 1))));
    return best;
  }
  double sum = 0.0;
  for (int i = 0; i < m; ++i) sum += std::pow(std::abs(f((i + 0.5) / m)), p);
  return std::pow(sum / m, 1.0 / p);
}

double modulus_of_smoothness(const TrueFunction& f, int r, double p, double t, const ModulusGrid& grid) {
  validate_modulus_args(r, p, t);
  grid.validate();
  double best = modulus_at(f, r, p, t, grid);
  for (double tg : grid.t_grid) {
    if (tg >= t) break;
    best = std::max(best, modulus_at(f, r, p, tg, grid));
  }
  return best;
}

std::vector<double> modulus_profile(const TrueFunction& f, int r, double p, const ModulusGrid& grid) {
  grid.validate();
  validate_modulus_args(r, p, grid.t_grid.front());
  std::vector<double> w(grid.t_grid.size());
  double running = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    running = std::max(running, modulus_at(f, r, p, grid.t_grid[i], grid));
    w[i] = running;
  }
  return w;
}

double besov_norm_estimate(const TrueFunction& f, double s, double p, double q, const ModulusGrid& grid) {
  if (!(s > 0.0) || !(p > 0.0) || !(q > 0.0)) {
    throw std::invalid_argument("besov_norm_estimate: need s > 0 and 0 < p, q <= inf");
  }
  const int r = static_cast<int>(std::floor(s)) + 1;
  const auto w = modulus_profile(f, r, p, grid);
  const auto& t = grid.t_grid;
  double seminorm = 0.0;
  if (std::isinf(q)) {
    for (std::size_t i = 0; i < t.size(); ++i) seminorm = std::max(seminorm, std::pow(t[i], -s) * w[i]);
  } else {
    auto integrand = [&](std::size_t i) { return std::pow(std::pow(t[i], -s) * w[i], q); };
    double integral = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      integral += 0.5 * (integrand(i) + integrand(i - 1)) * (std::log(t[i]) - std::log(t[i - 1]));
    }
    seminorm = std::pow(integral, 1.0 / q);
  }
  return lp_norm(f, p, grid.x_samples) + seminorm;
}

}  // namespace besovnet
