#ifndef DREST_CLI_HPP
#define DREST_CLI_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drest/simulation.hpp"

namespace drest {

// Exit codes: distinct families so scripts can tell failures apart.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIngestion = 3;
inline constexpr int kExitConvergence = 4;
inline constexpr int kExitNumerical = 5;

struct RunConfig {
  // shared
  std::vector<EstimatorKind> estimators;  // from --estimator
  bool variance_sandwich = true;          // from --variance
  bool variance_if = true;
  double level = 0.95;

  // estimate
  std::string data_path;
  std::string exposure_name = "x";
  std::string outcome_name = "y";
  std::string propensity_model;
  std::string outcome_model;
  std::optional<std::pair<double, double>> bounds;
  std::string out_path;  // optional CSV destination

  // simulate
  Eigen::Index sim_n = 800;
  double sim_sigma = 400.0;
  int sim_reps = 1000;
  std::uint64_t sim_seed = 1;
  std::vector<ScenarioKind> sim_scenarios;
  int sim_workers = 0;  // 0 = hardware concurrency
  std::string sim_out_prefix = "study";
};

std::vector<EstimatorKind> parse_estimator_selection(const std::string& text);
std::vector<ScenarioKind> parse_scenario_selection(const std::string& text);
std::pair<double, double> parse_bounds(const std::string& text);

// Estimation report for one dataset: point estimate and the selected
// variances for each selected estimator. Prints an aligned table; writes a
// full-precision CSV when an output path is set. Returns an exit code.
int run_estimate(const RunConfig& config);

// Runs the Monte Carlo study and writes the three CSV artifacts
// (<prefix>_results.csv, <prefix>_summary.csv, <prefix>_vr.csv) plus a
// readable summary table on stdout. Returns an exit code.
int run_simulate(const RunConfig& config);

int exit_code_for(const Error& error);

std::string estimate_csv_header();

}  // namespace drest

#endif
