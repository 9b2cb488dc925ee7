#ifndef DREST_SIMULATION_HPP
#define DREST_SIMULATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "drest/inference.hpp"

namespace drest {

struct DGPConfig {
  Eigen::Index n = 800;
  double sigma = 400.0;  // outcome SD, grams
  std::uint64_t seed = 1;
  int replicates = 1;

  void validate() const;
};

// CS: both nuisance models correct. MO: outcome model misspecified.
// MW: propensity (weight) model misspecified. MB: both misspecified.
enum class ScenarioKind { CS, MO, MW, MB };

std::string scenario_name(ScenarioKind kind);
ScenarioKind scenario_from_name(const std::string& name);

struct Scenario {
  ScenarioKind kind = ScenarioKind::CS;
  AnalysisSpec spec;
};

// True data-generating quantities, exposed for consistency checks.
double dgp_propensity(double z1, double z2, double z3);
double dgp_outcome_mean(double x, double z1, double z2);

// Analytic average causal effect of the data-generating mechanism.
double true_ace();

// One simulated sample, reproducible from (config.seed, replicate_index).
// Covariates: z1 ~ N(155, 7.6), z2 ~ Bern(.25), z3 ~ Bern(.75), plus the
// derived column z1_dev2 = (z1-155)^2 that the misspecified models use.
// Carries potential outcomes as simulation truth.
Dataset generate_sample(const DGPConfig& config, std::uint64_t replicate_index);

// Model specifications for a scenario. Outcome models are linear (identity
// link), including TMLE stage 1 on the scaled outcome, so the "correct"
// label stays truthful: affine rescaling preserves linear correctness.
Scenario scenario_specs(ScenarioKind kind);

struct ReplicateResult {
  int rep = 0;  // 1-based
  ScenarioKind scenario = ScenarioKind::CS;
  EstimatorKind estimator = EstimatorKind::Classic;
  double dr = 0.0;
  double se_es = 0.0;
  double se_if = 0.0;
  double ci_es_lo = 0.0, ci_es_hi = 0.0;
  double ci_if_lo = 0.0, ci_if_hi = 0.0;
  bool converged = false;
};

struct SummaryRow {
  ScenarioKind scenario = ScenarioKind::CS;
  EstimatorKind estimator = EstimatorKind::Classic;
  double bias = 0.0;
  double rel_bias_pct = 0.0;
  double ese = 0.0;      // sample SD of DR, n-1 denominator
  double ase_es = 0.0;
  double ser_es = 0.0;   // ase_es / ese
  double cov_es_pct = 0.0;
  double ase_if = 0.0;
  double ser_if = 0.0;
  double cov_if_pct = 0.0;
  Eigen::Index n_used = 0;
  Eigen::Index n_excluded = 0;
  std::vector<double> vr_es;  // per-replicate se/ESE, replicate order
  std::vector<double> vr_if;
};

struct SimSummary {
  double true_ace = 0.0;
  std::vector<SummaryRow> rows;

  const SummaryRow& row(ScenarioKind scenario, EstimatorKind estimator) const;
};

// Runs replicates on a worker pool; per-replicate failures are recorded as
// converged = false rather than aborting the study. Output order and all
// summary numbers are independent of the worker count.
std::vector<ReplicateResult> run_study(const DGPConfig& config,
                                       const std::vector<ScenarioKind>& scenarios,
                                       const std::vector<EstimatorKind>& estimators,
                                       int workers = 0, double level = 0.95);

SimSummary summarize(const std::vector<ReplicateResult>& results, double true_ace);

// CSV artifacts. Full-precision (shortest round-trip) number formatting,
// byte-stable across runs.
void write_results_csv(const std::string& path, const std::vector<ReplicateResult>& results);
void write_summary_csv(const std::string& path, const SimSummary& summary);
void write_vr_csv(const std::string& path, const std::vector<ReplicateResult>& results,
                  const SimSummary& summary);

std::string results_csv_header();
std::string summary_csv_header();
std::string vr_csv_header();

}  // namespace drest

#endif
