#pragma once

// Experiment orchestration shared by the command-line tool and the
// acceptance suite: design tables, fits, rate studies, prior checks and
// covering bounds, plus their on-disk outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "besovnet/arch_design.hpp"
#include "besovnet/besov_testbed.hpp"
#include "besovnet/priors.hpp"
#include "besovnet/relu_net.hpp"
#include "besovnet/shrinkage_conditions.hpp"
#include "besovnet/vi_engine.hpp"

namespace besovnet {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

// ---------------------------------------------------------------- design

struct DesignOptions {
  double cB = 10.0;
  MixtureOptions mixture;
};

struct DesignRow {
  std::string label;
  SmoothnessSpec smoothness;
  ArchSpec arch;
  MixturePriorSpec prior;
};

DesignRow design_row(const std::string& label, const SmoothnessSpec& smoothness, std::int64_t n,
                     const DesignOptions& options = {});

nlohmann::json design_json(const DesignRow& row);
/// n,L,W,sigma1,sigma2,pi1,pi2,log10_sigma1
std::string design_csv_header();
std::string design_csv_row(const DesignRow& row);

// ---------------------------------------------------------------- fits

struct DeskCaps {
  int max_depth = 3;
  int max_width = 32;
  std::int64_t max_parameters = 100000;
};

/// Network used for training: the designed (L, W) clipped to the caps, or the
/// full design when full_scale is set.
NetworkShape training_shape(const ArchSpec& arch, const DeskCaps& caps, bool full_scale);

struct ExperimentConfig {
  std::string function_id = "f2";
  SmoothnessSpec smoothness = SmoothnessSpec::log_singular();
  std::vector<std::int64_t> n_list{100};
  std::string prior = "mixture";
  TrainConfig train;
  double noise_sd = 0.1;
  DeskCaps caps;
  bool full_scale = false;
  DesignOptions design;
  int draws = 1000;
  double alpha = 0.05;
  int grid_points = 201;
  int replicates = 5;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument (n list empty or not strictly increasing, ...).
  void validate() const;
  nlohmann::json to_json() const;
};

struct FitSeeds {
  std::uint64_t data = 0;
  std::uint64_t train = 0;
  std::uint64_t predictive = 0;
};

FitSeeds fit_seeds(std::uint64_t seed, std::int64_t n, int replicate);

struct FitOutcome {
  std::int64_t n = 0;
  int replicate = 0;
  FitSeeds seeds;
  DesignRow design;
  NetworkShape shape;
  Dataset data;
  TrainResult trained;
  PredictiveSummary predictive;
  std::optional<std::string> failure;  // set when training diverged
};

std::vector<double> uniform_grid(int points);

FitOutcome run_fit(const ExperimentConfig& config, std::int64_t n, int replicate = 0);

/// Writes checkpoint, dataset, ELBO trace, predictive band and error CSVs
/// under out_dir with the given file prefix; returns the written file names.
std::vector<std::string> write_fit_outputs(const FitOutcome& fit, const TrueFunction& f0,
                                           const std::filesystem::path& out_dir, const std::string& prefix);

// ---------------------------------------------------------------- rate study

/// Least-squares slope of log(error) against log(n).
double fit_loglog_slope(std::span<const double> ns, std::span<const double> errors);
double theoretical_slope(const SmoothnessSpec& smoothness);

struct RateStudyResult {
  std::vector<std::int64_t> ns;
  std::vector<std::vector<double>> replicate_errors;  // NaN marks a failed replicate
  std::vector<double> median_errors;
  double slope = 0.0;
  double theoretical_slope = 0.0;
  bool partial = false;
};

/// Replicates run concurrently; each has seeds derived from (seed, n, r).
RateStudyResult run_rate_study(const ExperimentConfig& config);
nlohmann::json to_json(const RateStudyResult& result);

double median(std::vector<double> values);

// ---------------------------------------------------------------- outputs

/// Run record written next to every command's outputs.
class Manifest {
 public:
  Manifest(std::string command, nlohmann::json config);
  void add_file(const std::string& name);
  void add_seed(const std::string& key, std::uint64_t seed);
  void set(const std::string& key, nlohmann::json value);
  void add_duration(const std::string& key, double seconds);
  void write(const std::filesystem::path& path) const;
  const nlohmann::json& json() const { return j_; }

 private:
  nlohmann::json j_;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace besovnet
