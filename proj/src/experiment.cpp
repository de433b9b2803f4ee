#include "besovnet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "besovnet/format.hpp"
#include "besovnet/parallel.hpp"
#include "besovnet/rng.hpp"

namespace besovnet {

namespace {

nlohmann::json real_or_tag(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

// ---------------------------------------------------------------- design

DesignRow design_row(const std::string& label, const SmoothnessSpec& smoothness, std::int64_t n,
                     const DesignOptions& options) {
  DesignRow row;
  row.label = label;
  row.smoothness = smoothness;
  row.arch = design_architecture(smoothness, n, options.cB);
  row.prior = mixture_hyperparams(row.arch, options.mixture);
  return row;
}

nlohmann::json design_json(const DesignRow& r) {
  const auto& a = r.arch;
  const auto& p = r.prior;
  return nlohmann::json{{"function", r.label},
                        {"n", a.n},
                        {"s", r.smoothness.s},
                        {"p", real_or_tag(r.smoothness.p)},
                        {"q", real_or_tag(r.smoothness.q)},
                        {"d", r.smoothness.d},
                        {"m", r.smoothness.m},
                        {"N", a.N},
                        {"W0", a.W0},
                        {"L", a.L},
                        {"W", a.W},
                        {"S", a.S},
                        {"B", a.B},
                        {"T", a.T},
                        {"eps", a.eps},
                        {"log_a", p.log_a},
                        {"eta", p.eta},
                        {"log_sigma1", p.log_sigma1},
                        {"log10_sigma1", p.log_sigma1 / std::log(10.0)},
                        {"sigma1", std::exp(p.log_sigma1)},
                        {"sigma2", p.sigma2},
                        {"pi1", p.pi1},
                        {"pi2", p.pi2}};
}

std::string design_csv_header() { return "n,L,W,sigma1,sigma2,pi1,pi2,log10_sigma1"; }

std::string design_csv_row(const DesignRow& r) {
  std::ostringstream os;
  os << r.arch.n << ',' << r.arch.L << ',' << r.arch.W << ',' << format_double(std::exp(r.prior.log_sigma1)) << ','
     << format_double(r.prior.sigma2) << ',' << format_double(r.prior.pi1) << ',' << format_double(r.prior.pi2) << ','
     << format_double(r.prior.log_sigma1 / std::log(10.0));
  return os.str();
}

// ---------------------------------------------------------------- fits

NetworkShape training_shape(const ArchSpec& arch, const DeskCaps& caps, bool full_scale) {
  if (full_scale) return NetworkShape::uniform(arch.d, arch.L, static_cast<int>(arch.W));
  if (caps.max_depth < 1 || caps.max_width < 1 || caps.max_parameters < 1) {
    throw std::invalid_argument("desk caps must be positive");
  }
  const int L = std::min(arch.L, caps.max_depth);
  int W = static_cast<int>(std::min<std::int64_t>(arch.W, caps.max_width));
  while (W > 1 && dense_parameter_count(arch.d, L, W) > caps.max_parameters) --W;
  return NetworkShape::uniform(arch.d, L, W);
}

void ExperimentConfig::validate() const {
  if (n_list.empty()) throw std::invalid_argument("experiment: n list is empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 2) throw std::invalid_argument("experiment: every n must be >= 2");
    if (i > 0 && n_list[i] <= n_list[i - 1]) throw std::invalid_argument("experiment: n list must be strictly increasing");
  }
  smoothness.validate();
  train.validate();
  if (!(noise_sd > 0.0)) throw std::invalid_argument("experiment: noise sd must be positive");
  if (draws < 2) throw std::invalid_argument("experiment: need at least 2 predictive draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("experiment: alpha must lie in (0, 1)");
  if (grid_points < 2) throw std::invalid_argument("experiment: grid needs at least 2 points");
  if (replicates < 1) throw std::invalid_argument("experiment: replicates must be >= 1");
  const auto names = registered_densities();
  if (std::find(names.begin(), names.end(), prior) == names.end()) throw UnknownDensityError("unknown density '" + prior + "'");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"function", function_id},
          {"smoothness",
           {{"s", smoothness.s}, {"p", real_or_tag(smoothness.p)}, {"q", real_or_tag(smoothness.q)}, {"d", smoothness.d}, {"m", smoothness.m}}},
          {"n", n_list},
          {"prior", prior},
          {"train", besovnet::to_json(train)},
          {"noise_sd", noise_sd},
          {"caps", {{"max_depth", caps.max_depth}, {"max_width", caps.max_width}, {"max_parameters", caps.max_parameters}}},
          {"full_scale", full_scale},
          {"cB", design.cB},
          {"K0", design.mixture.K0},
          {"draws", draws},
          {"alpha", alpha},
          {"grid_points", grid_points},
          {"replicates", replicates},
          {"seed", seed}};
}

FitSeeds fit_seeds(std::uint64_t seed, std::int64_t n, int replicate) {
  const std::uint64_t base = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(replicate));
  return {derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3)};
}

std::vector<double> uniform_grid(int points) {
  if (points < 2) throw std::invalid_argument("uniform_grid: need at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return g;
}

FitOutcome run_fit(const ExperimentConfig& config, std::int64_t n, int replicate) {
  const auto f0 = TrueFunction::from_id(config.function_id);
  FitOutcome out;
  out.n = n;
  out.replicate = replicate;
  out.seeds = fit_seeds(config.seed, n, replicate);
  out.design = design_row(config.function_id, config.smoothness, n, config.design);
  out.shape = training_shape(out.design.arch, config.caps, config.full_scale);
  out.data = generate_dataset(f0, static_cast<std::size_t>(n), config.noise_sd, out.seeds.data);
  const ProductPrior prior(make_density(config.prior, out.design.prior));
  TrainConfig tc = config.train;
  tc.seed = out.seeds.train;
  tc.noise_sd = config.noise_sd;
  try {
    out.trained = train(out.shape, out.data, prior, tc);
  } catch (const TrainingDivergence& e) {
    out.failure = e.what();
    out.trained.elbo_trace = e.trace();
    return out;
  }
  const auto grid = uniform_grid(config.grid_points);
  out.predictive = posterior_predictive(out.trained.state, grid, config.draws, f0, out.data, config.alpha, out.seeds.predictive);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<std::string> write_fit_outputs(const FitOutcome& fit, const TrueFunction& f0,
                                           const std::filesystem::path& out_dir, const std::string& prefix) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> files;

  std::ostringstream data_csv;
  write_dataset_csv(data_csv, fit.data);
  write_text_file(out_dir / (prefix + "_data.csv"), data_csv.str());
  files.push_back(prefix + "_data.csv");

  std::ostringstream trace;
  trace << "iteration,elbo\n";
  for (std::size_t i = 0; i < fit.trained.elbo_trace.size(); ++i) trace << i << ',' << format_double(fit.trained.elbo_trace[i]) << '\n';
  write_text_file(out_dir / (prefix + "_trace.csv"), trace.str());
  files.push_back(prefix + "_trace.csv");
  if (fit.failure) return files;

  save_checkpoint(fit.trained.state, out_dir / (prefix + "_checkpoint.json"));
  files.push_back(prefix + "_checkpoint.json");
  files.push_back(prefix + "_checkpoint.mu.bin");
  files.push_back(prefix + "_checkpoint.rho.bin");

  const auto& p = fit.predictive;
  std::ostringstream band;
  band << "x,mean,lo,hi,sd,lo_sd,hi_sd,f0\n";
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    band << format_double(p.grid[j]) << ',' << format_double(p.mean[j]) << ',' << format_double(p.lower[j]) << ','
         << format_double(p.upper[j]) << ',' << format_double(p.sd[j]) << ',' << format_double(p.lower_sd[j]) << ','
         << format_double(p.upper_sd[j]) << ',' << format_double(f0(p.grid[j])) << '\n';
  }
  write_text_file(out_dir / (prefix + "_predictive.csv"), band.str());
  files.push_back(prefix + "_predictive.csv");

  std::ostringstream errs;
  errs << "error\n";
  for (double e : p.errors) errs << format_double(e) << '\n';
  write_text_file(out_dir / (prefix + "_errors.csv"), errs.str());
  files.push_back(prefix + "_errors.csv");
  return files;
}

// ---------------------------------------------------------------- rate study

double fit_loglog_slope(std::span<const double> ns, std::span<const double> errors) {
  if (ns.size() != errors.size() || ns.size() < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 matched points");
  const std::size_t k = ns.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ns[i] > 0.0 && errors[i] > 0.0)) throw std::invalid_argument("fit_loglog_slope: values must be positive");
    mx += std::log(ns[i]);
    my += std::log(errors[i]);
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(ns[i]) - mx;
    sxy += dx * (std::log(errors[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_loglog_slope: n values must differ");
  return sxy / sxx;
}

double theoretical_slope(const SmoothnessSpec& s) { return -s.s / (2.0 * s.s + s.d); }

double median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return empirical_quantile(std::move(values), 0.5);
}

RateStudyResult run_rate_study(const ExperimentConfig& config) {
  config.validate();
  if (config.n_list.size() < 3) throw std::invalid_argument("rate study: need at least 3 values of n");
  const std::size_t K = config.n_list.size();
  const auto R = static_cast<std::size_t>(config.replicates);
  RateStudyResult res;
  res.ns = config.n_list;
  res.theoretical_slope = theoretical_slope(config.smoothness);
  res.replicate_errors.assign(K, std::vector<double>(R, std::numeric_limits<double>::quiet_NaN()));
  parallel_for(K * R, [&](std::size_t job) {
    const std::size_t i = job / R;
    const std::size_t r = job % R;
    const auto fit = run_fit(config, config.n_list[i], static_cast<int>(r));
    if (!fit.failure) res.replicate_errors[i][r] = fit.predictive.posterior_mean_error;
  });
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < K; ++i) {
    const double m = median(res.replicate_errors[i]);
    res.median_errors.push_back(m);
    if (std::any_of(res.replicate_errors[i].begin(), res.replicate_errors[i].end(), [](double v) { return std::isnan(v); })) {
      res.partial = true;
    }
    if (std::isfinite(m)) {
      xs.push_back(static_cast<double>(res.ns[i]));
      ys.push_back(m);
    }
  }
  res.slope = xs.size() >= 2 ? fit_loglog_slope(xs, ys) : std::numeric_limits<double>::quiet_NaN();
  return res;
}

nlohmann::json to_json(const RateStudyResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.ns.size(); ++i) {
    nlohmann::json reps = nlohmann::json::array();
    for (double e : r.replicate_errors[i]) reps.push_back(real_or_tag(e));
    rows.push_back({{"n", r.ns[i]}, {"median_error", real_or_tag(r.median_errors[i])}, {"replicate_errors", reps}});
  }
  return {{"schema_version", kSchemaVersion},
          {"rows", rows},
          {"slope", real_or_tag(r.slope)},
          {"theoretical_slope", r.theoretical_slope},
          {"partial", r.partial}};
}

// ---------------------------------------------------------------- manifest

Manifest::Manifest(std::string command, nlohmann::json config) {
  j_ = {{"schema_version", kSchemaVersion},
        {"command", std::move(command)},
        {"config", std::move(config)},
        {"seeds", nlohmann::json::object()},
        {"files", nlohmann::json::array()}};
}

void Manifest::add_file(const std::string& name) { j_["files"].push_back(name); }
void Manifest::add_seed(const std::string& key, std::uint64_t seed) { j_["seeds"][key] = seed; }
void Manifest::set(const std::string& key, nlohmann::json value) { j_[key] = std::move(value); }
void Manifest::add_duration(const std::string& key, double seconds) { j_["durations_s"][key] = seconds; }
void Manifest::write(const std::filesystem::path& path) const { write_json_file(path, j_); }

}  // namespace besovnet
