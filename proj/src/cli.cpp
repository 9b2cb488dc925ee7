#include "drest/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "drest/csv.hpp"

namespace drest {

namespace {

std::string format_full(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t j = 0; j < row.size(); ++j)
      widths[j] = std::max(widths[j], row[j].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) line += "  ";
      line += row[j];
      line.append(widths[j] - row[j].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    std::cout << line << "\n";
  }
}

// Re-raise with context while keeping the exit-code family.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + std::string(e.what());
  if (dynamic_cast<const IngestError*>(&e)) throw IngestError(msg);
  if (dynamic_cast<const ConvergenceError*>(&e)) throw ConvergenceError(msg);
  if (dynamic_cast<const InputError*>(&e)) throw InputError(msg);
  if (dynamic_cast<const SchemaError*>(&e)) throw SchemaError(msg);
  throw Error(msg);
}

}  // namespace

std::vector<EstimatorKind> parse_estimator_selection(const std::string& text) {
  if (text == "all")
    return {EstimatorKind::Classic, EstimatorKind::WeightedRegression,
            EstimatorKind::Tmle};
  std::vector<EstimatorKind> out;
  for (const auto& name : split_list(text)) out.push_back(estimator_from_name(name));
  if (out.empty()) throw InputError("empty estimator selection");
  return out;
}

std::vector<ScenarioKind> parse_scenario_selection(const std::string& text) {
  if (text == "all")
    return {ScenarioKind::CS, ScenarioKind::MO, ScenarioKind::MW, ScenarioKind::MB};
  std::vector<ScenarioKind> out;
  for (const auto& name : split_list(text)) out.push_back(scenario_from_name(name));
  if (out.empty()) throw InputError("empty scenario selection");
  return out;
}

std::pair<double, double> parse_bounds(const std::string& text) {
  const auto parts = split_list(text);
  if (parts.size() != 2) throw InputError("--bounds expects 'lo,hi'");
  try {
    const double lo = std::stod(parts[0]);
    const double hi = std::stod(parts[1]);
    if (!(hi > lo)) throw InputError("--bounds requires lo < hi");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw InputError("--bounds expects numeric 'lo,hi'");
  }
}

int exit_code_for(const Error& error) {
  if (dynamic_cast<const IngestError*>(&error)) return kExitIngestion;
  if (dynamic_cast<const ConvergenceError*>(&error)) return kExitConvergence;
  if (dynamic_cast<const InputError*>(&error)) return kExitUsage;
  if (dynamic_cast<const SchemaError*>(&error)) return kExitUsage;
  return kExitNumerical;
}

std::string estimate_csv_header() {
  return "estimator,ace,se_es,ci_es_lo,ci_es_hi,se_if,ci_if_lo,ci_if_hi";
}

int run_estimate(const RunConfig& config) {
  if (config.level <= 0.0 || config.level >= 1.0)
    throw InputError("--level must lie in (0,1)");
  if (config.data_path.empty()) throw InputError("--data is required");
  if (config.propensity_model.empty()) throw InputError("--propensity-model is required");
  if (config.outcome_model.empty()) throw InputError("--outcome-model is required");
  if (config.estimators.empty()) throw InputError("no estimator selected");

  const Dataset data = ingest_csv(config.data_path, config.exposure_name,
                                  config.outcome_name);

  AnalysisSpec spec;
  spec.propensity = ModelSpec::parse(config.propensity_model, config.exposure_name);
  spec.outcome = ModelSpec::parse(config.outcome_model, config.outcome_name);
  spec.outcome_link = Link::Identity;
  spec.tmle_stage1_link = Link::Logit;
  spec.bounds = config.bounds;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  struct Row {
    EstimatorKind kind;
    double ace, se_es, ci_es_lo, ci_es_hi, se_if, ci_if_lo, ci_if_hi;
  };
  std::vector<Row> rows;

  PropensityFit ps;
  try {
    ps = estimate_propensity(data, spec.propensity);
  } catch (const Error& e) {
    rethrow_with_context(e, "propensity model");
  }

  for (EstimatorKind kind : config.estimators) {
    try {
      const CausalEstimate est = estimate_ace(kind, data, ps, spec);
      Row row{kind, est.dr, nan, nan, nan, nan, nan, nan};
      if (config.variance_sandwich) {
        const SandwichResult sw =
            sandwich_at(kind, data, spec, make_theta(kind, ps, est));
        row.se_es = sw.se_dr;
        std::tie(row.ci_es_lo, row.ci_es_hi) = wald_ci(est.dr, sw.se_dr, config.level);
      }
      if (config.variance_if) {
        row.se_if = if_variance_se(est, ps, data);
        std::tie(row.ci_if_lo, row.ci_if_hi) = wald_ci(est.dr, row.se_if, config.level);
      }
      rows.push_back(row);
    } catch (const Error& e) {
      rethrow_with_context(e, estimator_name(kind));
    }
  }

  // Report rounded like the estimation tables; CSV keeps full precision.
  const std::string pct = format_fixed(config.level * 100.0, 0);
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> head{"estimator", "ACE"};
  if (config.variance_sandwich) {
    head.push_back("ES-SE");
    head.push_back("ES-" + pct + "% CI");
  }
  if (config.variance_if) {
    head.push_back("IF-SE");
    head.push_back("IF-" + pct + "% CI");
  }
  table.push_back(head);
  for (const Row& row : rows) {
    std::vector<std::string> cells{estimator_name(row.kind), format_fixed(row.ace, 0)};
    if (config.variance_sandwich) {
      cells.push_back(format_fixed(row.se_es, 0));
      cells.push_back("(" + format_fixed(row.ci_es_lo, 0) + ", " +
                      format_fixed(row.ci_es_hi, 0) + ")");
    }
    if (config.variance_if) {
      cells.push_back(format_fixed(row.se_if, 0));
      cells.push_back("(" + format_fixed(row.ci_if_lo, 0) + ", " +
                      format_fixed(row.ci_if_hi, 0) + ")");
    }
    table.push_back(cells);
  }
  print_table(table);

  if (!config.out_path.empty()) {
    std::string csv = estimate_csv_header() + "\n";
    for (const Row& row : rows) {
      csv += estimator_name(row.kind) + ',' + format_full(row.ace) + ',' +
             format_full(row.se_es) + ',' + format_full(row.ci_es_lo) + ',' +
             format_full(row.ci_es_hi) + ',' + format_full(row.se_if) + ',' +
             format_full(row.ci_if_lo) + ',' + format_full(row.ci_if_hi) + '\n';
    }
    std::ofstream file(config.out_path, std::ios::binary);
    if (!file) throw IngestError("cannot open '" + config.out_path + "' for writing");
    file << csv;
  }
  return kExitOk;
}

int run_simulate(const RunConfig& config) {
  if (config.level <= 0.0 || config.level >= 1.0)
    throw InputError("--level must lie in (0,1)");
  if (config.estimators.empty()) throw InputError("no estimator selected");
  if (config.sim_scenarios.empty()) throw InputError("no scenario selected");

  DGPConfig dgp;
  dgp.n = config.sim_n;
  dgp.sigma = config.sim_sigma;
  dgp.seed = config.sim_seed;
  dgp.replicates = config.sim_reps;
  dgp.validate();

  const auto start = std::chrono::steady_clock::now();
  const std::vector<ReplicateResult> results =
      run_study(dgp, config.sim_scenarios, config.estimators, config.sim_workers,
                config.level);
  const SimSummary summary = summarize(results, true_ace());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string prefix = config.sim_out_prefix;
  write_results_csv(prefix + "_results.csv", results);
  write_summary_csv(prefix + "_summary.csv", summary);
  write_vr_csv(prefix + "_vr.csv", results, summary);

  std::vector<std::vector<std::string>> table;
  table.push_back({"scenario", "estimator", "bias", "rel.bias%", "ESE", "ASE,ES",
                   "SER,ES", "Cov,ES%", "ASE,IF", "SER,IF", "Cov,IF%", "excl"});
  Eigen::Index excluded = 0;
  for (const auto& row : summary.rows) {
    excluded += row.n_excluded;
    table.push_back({scenario_name(row.scenario), estimator_name(row.estimator),
                     format_fixed(row.bias, 1), format_fixed(row.rel_bias_pct, 1),
                     format_fixed(row.ese, 1), format_fixed(row.ase_es, 1),
                     format_fixed(row.ser_es, 2), format_fixed(row.cov_es_pct, 0),
                     format_fixed(row.ase_if, 1), format_fixed(row.ser_if, 2),
                     format_fixed(row.cov_if_pct, 0), std::to_string(row.n_excluded)});
  }
  print_table(table);
  std::cout << "replicates: " << config.sim_reps << ", excluded rows: " << excluded
            << ", runtime: " << format_fixed(seconds, 1) << "s\n";
  std::cout << "wrote " << prefix << "_results.csv, " << prefix << "_summary.csv, "
            << prefix << "_vr.csv\n";
  return kExitOk;
}

}  // namespace drest
