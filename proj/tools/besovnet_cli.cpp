// besovnet: design tables, fits, prior checks, rate studies and covering bounds.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "besovnet/arch_design.hpp"
#include "besovnet/covering.hpp"
#include "besovnet/experiment.hpp"
#include "besovnet/format.hpp"
#include "besovnet/priors.hpp"
#include "besovnet/shrinkage_conditions.hpp"
#include "besovnet/vi_engine.hpp"

namespace fs = std::filesystem;
using namespace besovnet;

namespace {

/// Reads a JSON object whose top-level keys are global flags and whose nested
/// objects hold the options of a subcommand, e.g. {"seed": 3, "fit": {"n": [100]}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const auto& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      if (opt->count() > 0) {
        const auto values = opt->results();
        j[name] = values.size() == 1 ? nlohmann::json(values.front()) : nlohmann::json(values);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) j[sub->get_name()] = nlohmann::json::parse(to_config(sub, default_also, false, ""));
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported config value " + v.dump());
  }

  static void collect(const nlohmann::json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        collect(value, sub, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool full_scale = false;
  bool record_timing = false;
};

double parse_extended_real(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "Inf") return kInfinity;
  return parse_double(s);
}

struct SpecArgs {
  std::string function;
  std::optional<double> s;
  std::optional<std::string> p, q;
  std::optional<int> d, m;

  void add(CLI::App* cmd, const std::string& default_function) {
    function = default_function;
    cmd->add_option("--function", function, "Target function id (f1 = Cantor, f2 = log-singular); empty for a custom spec")
        ->capture_default_str();
    cmd->add_option("--s", s, "Smoothness s (overrides the function's value)");
    cmd->add_option("--p", p, "Integrability p, 'inf' allowed");
    cmd->add_option("--q", q, "Fine index q, 'inf' allowed");
    cmd->add_option("--d", d, "Input dimension");
    cmd->add_option("--m", m, "Approximation order m");
  }

  bool custom() const { return s || p || q || d || m; }

  SmoothnessSpec resolve() const {
    SmoothnessSpec spec;
    if (!function.empty()) {
      spec = SmoothnessSpec::for_function(function);
    } else if (!s) {
      throw std::invalid_argument("either --function or --s is required");
    }
    if (s) spec.s = *s;
    if (p) spec.p = parse_extended_real(*p);
    if (q) spec.q = parse_extended_real(*q);
    if (d) spec.d = *d;
    if (m) spec.m = *m;
    spec.validate();
    return spec;
  }

  std::string label() const { return custom() || function.empty() ? "custom" : function; }
};

struct MixtureArgs {
  double cB = 10.0;
  double K0 = 5.0;
  std::string counting = "canonical";
  std::string sigma1_rule = "admissible";
  std::string sigma2_rule = "experiment";

  void add(CLI::App* cmd) {
    cmd->add_option("--cB", cB, "Constant in B_n = cB N^xi")->capture_default_str();
    cmd->add_option("--K0", K0, "Constant K0")->capture_default_str();
    cmd->add_option("--counting", counting, "S/T counting convention")
        ->check(CLI::IsMember({"canonical", "compat"}))
        ->capture_default_str();
    cmd->add_option("--sigma1-rule", sigma1_rule, "Spike scale rule")
        ->check(CLI::IsMember({"admissible", "saturated"}))
        ->capture_default_str();
    cmd->add_option("--sigma2-rule", sigma2_rule, "Slab scale divisor: experiment = 2(K0+1), example = 2K0")
        ->check(CLI::IsMember({"experiment", "example"}))
        ->capture_default_str();
  }

  DesignOptions resolve() const {
    DesignOptions o;
    o.cB = cB;
    o.mixture.K0 = K0;
    o.mixture.counting = counting == "compat" ? CountConvention::Compat : CountConvention::Canonical;
    o.mixture.sigma1_rule = sigma1_rule == "saturated" ? SigmaOneRule::Saturated : SigmaOneRule::Admissible;
    o.mixture.sigma2_rule = sigma2_rule == "example" ? SigmaTwoRule::ExampleDivisor : SigmaTwoRule::ExperimentDivisor;
    return o;
  }
};

struct TrainArgs {
  std::string prior = "mixture";
  int iterations = 3000;
  int batch_size = 0;
  int mc = 1;
  double lr = 1e-3;
  std::string optimizer = "adam";
  double init_sigma = 1e-2;
  double noise_sd = 0.1;
  int draws = 1000;
  double alpha = 0.05;
  int grid_points = 201;
  int max_depth = 3;
  int max_width = 32;
  std::int64_t max_params = 100000;

  void add(CLI::App* cmd) {
    cmd->add_option("--prior", prior, "Prior density: mixture, gauss, laplace, uniform-slab")->capture_default_str();
    cmd->add_option("--iterations", iterations, "Optimizer steps")->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Mini-batch size (0 = full batch)")->capture_default_str();
    cmd->add_option("--mc", mc, "Monte Carlo draws per step")->capture_default_str();
    cmd->add_option("--lr", lr, "Learning rate")->capture_default_str();
    cmd->add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
    cmd->add_option("--init-sigma", init_sigma, "Initial variational scale")->capture_default_str();
    cmd->add_option("--noise-sd", noise_sd, "Known noise standard deviation")->capture_default_str();
    cmd->add_option("--draws", draws, "Posterior predictive draws")->capture_default_str();
    cmd->add_option("--alpha", alpha, "Prediction band level")->capture_default_str();
    cmd->add_option("--grid-points", grid_points, "Evaluation grid size on [0, 1]")->capture_default_str();
    cmd->add_option("--max-depth", max_depth, "Desk-scale depth cap")->capture_default_str();
    cmd->add_option("--max-width", max_width, "Desk-scale width cap")->capture_default_str();
    cmd->add_option("--max-params", max_params, "Desk-scale parameter cap")->capture_default_str();
  }

  void apply(ExperimentConfig& c) const {
    c.prior = prior;
    c.train.iterations = iterations;
    c.train.batch_size = batch_size;
    c.train.mc_samples = mc;
    c.train.learning_rate = lr;
    c.train.optimizer = optimizer == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
    c.train.init_sigma_q = init_sigma;
    c.train.noise_sd = noise_sd;
    c.noise_sd = noise_sd;
    c.draws = draws;
    c.alpha = alpha;
    c.grid_points = grid_points;
    c.caps = {max_depth, max_width, max_params};
  }
};

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------- commands

int cmd_design(const Globals& g, const SpecArgs& spec_args, const MixtureArgs& mix, const std::vector<std::int64_t>& ns) {
  const auto spec = spec_args.resolve();
  const auto options = mix.resolve();
  const fs::path out(g.out_dir);
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << design_csv_header() << '\n';
  std::cout << std::left << std::setw(7) << "n" << std::setw(5) << "L" << std::setw(7) << "W" << std::setw(14) << "sigma1"
            << std::setw(15) << "log10(sigma1)" << std::setw(10) << "sigma2" << std::setw(9) << "pi1" << "pi2\n";
  for (auto n : ns) {
    const auto row = design_row(spec_args.label(), spec, n, options);
    rows.push_back(design_json(row));
    csv << design_csv_row(row) << '\n';
    std::cout << std::left << std::setw(7) << n << std::setw(5) << row.arch.L << std::setw(7) << row.arch.W << std::setw(14)
              << fixed(std::exp(row.prior.log_sigma1), 5) << std::setw(15) << fixed(row.prior.log_sigma1 / std::log(10.0), 6)
              << std::setw(10) << fixed(row.prior.sigma2, 4) << std::setw(9) << fixed(row.prior.pi1, 4)
              << fixed(row.prior.pi2, 4) << '\n';
  }
  write_text_file(out / "design.csv", csv.str());
  write_json_file(out / "design.json", {{"schema_version", kSchemaVersion}, {"rows", rows}});
  return kExitOk;
}

int cmd_fit(const Globals& g, ExperimentConfig config) {
  config.validate();
  const fs::path out(g.out_dir);
  fs::create_directories(out);
  const auto f0 = TrueFunction::from_id(config.function_id);
  Manifest manifest("fit", config.to_json());
  nlohmann::json summary = {{"schema_version", kSchemaVersion}, {"fits", nlohmann::json::array()}};
  int status = kExitOk;
  for (auto n : config.n_list) {
    Stopwatch watch;
    const auto fit = run_fit(config, n, 0);
    if (fit.shape.parameter_count() > static_cast<std::size_t>(config.caps.max_parameters)) {
      std::cerr << "warning: training a " << fit.shape.parameter_count() << "-parameter network; this will be slow\n";
    }
    const std::string prefix = "fit_" + config.function_id + "_n" + std::to_string(n);
    for (const auto& f : write_fit_outputs(fit, f0, out, prefix)) manifest.add_file(f);
    manifest.add_seed(prefix + ".data", fit.seeds.data);
    manifest.add_seed(prefix + ".train", fit.seeds.train);
    manifest.add_seed(prefix + ".predictive", fit.seeds.predictive);
    if (g.record_timing) manifest.add_duration(prefix, watch.seconds());
    nlohmann::json entry{{"n", n}, {"shape", fit.shape.describe()}, {"T", fit.shape.parameter_count()}, {"design", design_json(fit.design)}};
    if (fit.failure) {
      entry["failure"] = *fit.failure;
      std::cerr << "error: n=" << n << ": " << *fit.failure << '\n';
      status = kExitFailure;
    } else {
      const auto& p = fit.predictive;
      std::size_t covered = 0;
      for (std::size_t j = 0; j < p.grid.size(); ++j) covered += (p.lower[j] <= f0(p.grid[j]) && f0(p.grid[j]) <= p.upper[j]);
      const double coverage = static_cast<double>(covered) / static_cast<double>(p.grid.size());
      entry["posterior_mean_error"] = p.posterior_mean_error;
      entry["median_draw_error"] = median(p.errors);
      entry["band_coverage"] = coverage;
      entry["final_elbo"] = fit.trained.elbo_trace.back();
      std::cout << "n=" << n << " net=" << fit.shape.describe() << " posterior-mean error=" << fixed(p.posterior_mean_error, 5)
                << " median draw error=" << fixed(median(p.errors), 5) << " band coverage=" << fixed(coverage, 3) << '\n';
    }
    summary["fits"].push_back(entry);
  }
  write_json_file(out / "fit_summary.json", summary);
  manifest.add_file("fit_summary.json");
  manifest.set("status", status == kExitOk ? "ok" : "diverged");
  manifest.write(out / "fit_manifest.json");
  return status;
}

int cmd_predict(const Globals& g, const std::string& checkpoint, const std::string& data_path, const std::string& function,
                int draws, double alpha, int grid_points) {
  const auto state = load_checkpoint(checkpoint);
  const auto f0 = TrueFunction::from_id(function);
  Dataset data;
  if (!data_path.empty()) {
    std::ifstream is(data_path);
    if (!is) throw std::invalid_argument("cannot open dataset " + data_path);
    data = read_dataset_csv(is);
  }
  const auto grid = uniform_grid(grid_points);
  const std::uint64_t seed = derive_seed(g.seed, 7);
  const auto p = posterior_predictive(state, grid, draws, f0, data, alpha, seed);
  const fs::path out(g.out_dir);
  std::ostringstream band;
  band << "x,mean,lo,hi,sd,lo_sd,hi_sd,f0\n";
  for (std::size_t j = 0; j < p.grid.size(); ++j) {
    band << format_double(p.grid[j]) << ',' << format_double(p.mean[j]) << ',' << format_double(p.lower[j]) << ','
         << format_double(p.upper[j]) << ',' << format_double(p.sd[j]) << ',' << format_double(p.lower_sd[j]) << ','
         << format_double(p.upper_sd[j]) << ',' << format_double(f0(p.grid[j])) << '\n';
  }
  write_text_file(out / "predict_predictive.csv", band.str());
  Manifest manifest("predict", {{"checkpoint", checkpoint}, {"data", data_path}, {"function", function}, {"draws", draws}, {"alpha", alpha}, {"grid_points", grid_points}});
  manifest.add_seed("predictive", seed);
  manifest.add_file("predict_predictive.csv");
  if (!p.errors.empty()) {
    std::ostringstream errs;
    errs << "error\n";
    for (double e : p.errors) errs << format_double(e) << '\n';
    write_text_file(out / "predict_errors.csv", errs.str());
    manifest.add_file("predict_errors.csv");
    manifest.set("posterior_mean_error", p.posterior_mean_error);
    std::cout << "posterior-mean error=" << fixed(p.posterior_mean_error, 5) << " median draw error=" << fixed(median(p.errors), 5) << '\n';
  }
  manifest.write(out / "predict_manifest.json");
  return kExitOk;
}

int cmd_check_prior(const Globals& g, const SpecArgs& spec_args, const MixtureArgs& mix, const std::vector<std::int64_t>& ns,
                    const std::string& density, ConditionOptions options) {
  const auto spec = spec_args.resolve();
  const auto design = mix.resolve();
  options.K0 = design.mixture.K0;
  options.counting = design.mixture.counting;
  // Validate the name before doing any work so a typo maps to a usage error.
  const auto names = registered_densities();
  if (std::find(names.begin(), names.end(), density) == names.end()) throw UnknownDensityError("unknown density '" + density + "'");
  nlohmann::json reports = nlohmann::json::array();
  bool all_pass = true;
  for (auto n : ns) {
    const auto row = design_row(spec_args.label(), spec, n, design);
    const auto g_density = make_density(density, row.prior);
    const auto report = check_shrinkage_conditions(*g_density, row.arch, options);
    auto j = to_json(report);
    j["density"] = g_density->describe();
    reports.push_back(j);
    all_pass = all_pass && report.passed();
    std::cout << "n=" << n << " spike=" << (report.pass_spike ? "pass" : "FAIL") << " (margin " << fixed(report.spike_margin, 4)
              << ") tail=" << (report.pass_tail ? "pass" : "FAIL") << " (" << fixed(report.neg_log_g_B, 6) << " vs "
              << fixed(report.tail_rhs, 6) << ") support=" << (report.pass_support ? "pass" : "FAIL") << " (log v_n "
              << fixed(report.log_v_n, 6) << " vs " << fixed(report.log_support_rhs, 6) << ")\n";
  }
  const fs::path out(g.out_dir);
  write_json_file(out / "check_prior.json", {{"schema_version", kSchemaVersion},
                                             {"function", spec_args.label()},
                                             {"density", density},
                                             {"K", options.K},
                                             {"K0", options.K0},
                                             {"tail_constant", options.tail_constant},
                                             {"support_tolerance", options.support_tolerance},
                                             {"reports", reports},
                                             {"pass", all_pass}});
  return all_pass ? kExitOk : kExitFailure;
}

int cmd_rate_study(const Globals& g, ExperimentConfig config) {
  if (config.n_list.size() < 3) throw std::invalid_argument("rate-study needs at least 3 values of n");
  Stopwatch watch;
  const auto result = run_rate_study(config);
  const fs::path out(g.out_dir);
  write_json_file(out / "rate_study.json", to_json(result));
  std::ostringstream csv;
  csv << "n,median_error";
  for (int r = 0; r < config.replicates; ++r) csv << ",rep" << r;
  csv << '\n';
  for (std::size_t i = 0; i < result.ns.size(); ++i) {
    csv << result.ns[i] << ',' << format_double(result.median_errors[i]);
    for (double e : result.replicate_errors[i]) csv << ',' << format_double(e);
    csv << '\n';
  }
  write_text_file(out / "rate_study.csv", csv.str());
  Manifest manifest("rate-study", config.to_json());
  for (auto n : result.ns) {
    for (int r = 0; r < config.replicates; ++r) {
      const auto s = fit_seeds(config.seed, n, r);
      const std::string key = "n" + std::to_string(n) + "_rep" + std::to_string(r);
      manifest.add_seed(key + ".data", s.data);
      manifest.add_seed(key + ".train", s.train);
      manifest.add_seed(key + ".predictive", s.predictive);
    }
  }
  manifest.add_file("rate_study.json");
  manifest.add_file("rate_study.csv");
  if (g.record_timing) manifest.add_duration("total", watch.seconds());
  manifest.write(out / "rate_study_manifest.json");
  for (std::size_t i = 0; i < result.ns.size(); ++i) {
    std::cout << "n=" << result.ns[i] << " median posterior-mean error=" << fixed(result.median_errors[i], 5) << '\n';
  }
  std::cout << "slope=" << fixed(result.slope, 4) << " theoretical=" << fixed(result.theoretical_slope, 4)
            << (result.partial ? " (partial: some replicates failed)" : "") << '\n';
  return result.partial ? kExitFailure : kExitOk;
}

int cmd_covering(const Globals& g, const SpecArgs& spec_args, const MixtureArgs& mix, std::int64_t n,
                 std::optional<double> delta, double delta_divisor, bool truncated, std::optional<double> a,
                 std::optional<double> log_a) {
  const auto spec = spec_args.resolve();
  const auto row = design_row(spec_args.label(), spec, n, mix.resolve());
  const auto& arch = row.arch;
  if (!(delta_divisor > 0.0)) throw std::invalid_argument("--delta-divisor must be positive");
  const double log_delta = delta ? std::log(*delta) : std::log(arch.eps / delta_divisor);
  if (delta && !(*delta > 0.0)) throw std::invalid_argument("--delta must be positive");
  const double n_eps2 = static_cast<double>(n) * arch.eps * arch.eps;
  nlohmann::json j{{"schema_version", kSchemaVersion}, {"design", design_json(row)}, {"log_delta", log_delta}, {"n_eps2", n_eps2}};
  const double plain = covering_bound_log(arch.L, arch.W, arch.S, arch.B, log_delta);
  j["covering_bound"] = plain;
  j["ratio_to_n_eps2"] = plain / n_eps2;
  std::cout << "log N(delta) <= " << fixed(plain, 8) << "  (n eps^2 = " << fixed(n_eps2, 8)
            << ", ratio = " << fixed(plain / n_eps2, 6) << ")\n";
  if (truncated) {
    const double la = log_a ? *log_a : (a ? std::log(*a) : row.prior.log_a);
    j["log_a"] = la;
    try {
      const double t = covering_bound_truncated_log(arch.L, arch.W, arch.S, arch.B, la, log_delta);
      j["covering_bound_truncated"] = t;
      std::cout << "truncated bound = " << fixed(t, 8) << '\n';
    } catch (const CoveringPreconditionError& e) {
      std::cerr << "error: " << e.what() << "; minimal delta = exp(" << fixed(e.log_min_delta(), 10) << ")\n";
      j["error"] = e.what();
      j["log_min_delta"] = e.log_min_delta();
      write_json_file(fs::path(g.out_dir) / "covering.json", j);
      return kExitUsage;
    }
  }
  write_json_file(fs::path(g.out_dir) / "covering.json", j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian ReLU networks on Besov targets: design, fit and checks"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file mirroring the command-line flags");

  Globals g;
  app.add_option("--seed", g.seed, "Base seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--full-scale", g.full_scale, "Train the full designed geometry instead of the desk-scale cap");
  app.add_flag("--record-timing", g.record_timing, "Record wall-clock durations in run manifests");

  std::vector<std::int64_t> design_ns{100, 1000};
  SpecArgs design_spec;
  MixtureArgs design_mix;
  auto* design = app.add_subcommand("design", "Architecture and prior hyperparameters for each n");
  design_spec.add(design, "f1");
  design_mix.add(design);
  design->add_option("--n", design_ns, "Sample sizes")->delimiter(',')->capture_default_str();

  std::vector<std::int64_t> fit_ns{100};
  std::string fit_function = "f2";
  TrainArgs fit_train;
  MixtureArgs fit_mix;
  auto* fit = app.add_subcommand("fit", "Generate data, train by variational inference, summarize the posterior");
  fit->add_option("--function", fit_function, "Target function id (f1 or f2)")->capture_default_str();
  fit->add_option("--n", fit_ns, "Sample sizes")->delimiter(',')->capture_default_str();
  fit_train.add(fit);
  fit_mix.add(fit);

  std::string pred_checkpoint, pred_data, pred_function = "f2";
  int pred_draws = 1000, pred_grid = 201;
  double pred_alpha = 0.05;
  auto* predict = app.add_subcommand("predict", "Posterior predictive summary from a saved checkpoint");
  predict->add_option("--checkpoint", pred_checkpoint, "Checkpoint JSON written by fit")->required();
  predict->add_option("--data", pred_data, "Dataset CSV for the empirical errors");
  predict->add_option("--function", pred_function, "True function id")->capture_default_str();
  predict->add_option("--draws", pred_draws, "Predictive draws")->capture_default_str();
  predict->add_option("--alpha", pred_alpha, "Band level")->capture_default_str();
  predict->add_option("--grid-points", pred_grid, "Grid size")->capture_default_str();

  std::vector<std::int64_t> check_ns{100, 500, 1000, 5000};
  SpecArgs check_spec;
  MixtureArgs check_mix;
  std::string check_density = "mixture";
  ConditionOptions check_options;
  auto* check = app.add_subcommand("check-prior", "Check the shrinkage conditions for a registered density");
  check_spec.add(check, "f2");
  check_mix.add(check);
  check->add_option("--n", check_ns, "Sample sizes")->delimiter(',')->capture_default_str();
  check->add_option("--density", check_density, "mixture, gauss, laplace or uniform-slab")->capture_default_str();
  check->add_option("--K", check_options.K, "Constant K in eta_n")->capture_default_str();
  check->add_option("--tail-constant", check_options.tail_constant, "C in -log g(B_n) <= C (log n)^2")->capture_default_str();
  check->add_option("--support-tol", check_options.support_tolerance, "tol in v_n <= tol exp(-K0 n eps^2)")->capture_default_str();

  std::vector<std::int64_t> rate_ns{100, 300, 1000};
  std::string rate_function = "f2";
  int rate_replicates = 5;
  TrainArgs rate_train;
  rate_train.draws = 200;
  MixtureArgs rate_mix;
  auto* rate = app.add_subcommand("rate-study", "Median posterior-mean error across n and its log-log slope");
  rate->add_option("--function", rate_function, "Target function id (f1 or f2)")->capture_default_str();
  rate->add_option("--n", rate_ns, "Sample sizes (at least 3)")->delimiter(',')->capture_default_str();
  rate->add_option("--replicates", rate_replicates, "Replicates per n")->capture_default_str();
  rate_train.add(rate);
  rate_mix.add(rate);

  SpecArgs cov_spec;
  MixtureArgs cov_mix;
  std::int64_t cov_n = 100;
  std::optional<double> cov_delta, cov_a, cov_log_a;
  double cov_divisor = 36.0;
  bool cov_truncated = false;
  auto* cover = app.add_subcommand("covering", "Covering-number bounds for a designed network class");
  cov_spec.add(cover, "f1");
  cov_mix.add(cover);
  cover->add_option("--n", cov_n, "Sample size")->capture_default_str();
  cover->add_option("--delta", cov_delta, "Radius delta (default eps_n / divisor)");
  cover->add_option("--delta-divisor", cov_divisor, "delta = eps_n / divisor")->capture_default_str();
  cover->add_flag("--truncated", cov_truncated, "Also bound the thresholded class");
  cover->add_option("--a", cov_a, "Threshold a (default a_n)");
  cover->add_option("--log-a", cov_log_a, "Natural log of the threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  auto experiment = [&](const std::string& function, const std::vector<std::int64_t>& ns, const TrainArgs& t,
                        const MixtureArgs& m) {
    ExperimentConfig c;
    c.function_id = function;
    c.smoothness = SmoothnessSpec::for_function(function);
    c.n_list = ns;
    t.apply(c);
    c.design = m.resolve();
    c.full_scale = g.full_scale;
    c.seed = g.seed;
    return c;
  };

  try {
    if (design->parsed()) return cmd_design(g, design_spec, design_mix, design_ns);
    if (fit->parsed()) return cmd_fit(g, experiment(fit_function, fit_ns, fit_train, fit_mix));
    if (predict->parsed()) return cmd_predict(g, pred_checkpoint, pred_data, pred_function, pred_draws, pred_alpha, pred_grid);
    if (check->parsed()) return cmd_check_prior(g, check_spec, check_mix, check_ns, check_density, check_options);
    if (rate->parsed()) {
      auto c = experiment(rate_function, rate_ns, rate_train, rate_mix);
      c.replicates = rate_replicates;
      return cmd_rate_study(g, c);
    }
    if (cover->parsed()) {
      return cmd_covering(g, cov_spec, cov_mix, cov_n, cov_delta, cov_divisor, cov_truncated, cov_a, cov_log_a);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
