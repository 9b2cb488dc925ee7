#include "drest/simulation.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "drest/rng.hpp"

namespace drest {

namespace {

constexpr double kZ1Mean = 155.0;
constexpr double kZ1Sd = 7.6;
constexpr double kZ2Prev = 0.25;
constexpr double kZ3Prev = 0.75;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general);
  return std::string(buf, res.ptr);
}

void append_csv_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += fields[i];
  }
  out += '\n';
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot open '" + path + "' for writing");
  file << content;
  if (!file) throw InputError("failed writing '" + path + "'");
}

}  // namespace

void DGPConfig::validate() const {
  if (n < 2) throw InputError("simulation n must be at least 2");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (replicates < 1) throw InputError("replicates must be at least 1");
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::CS: return "CS";
    case ScenarioKind::MO: return "MO";
    case ScenarioKind::MW: return "MW";
    case ScenarioKind::MB: return "MB";
  }
  return "?";
}

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "CS") return ScenarioKind::CS;
  if (name == "MO") return ScenarioKind::MO;
  if (name == "MW") return ScenarioKind::MW;
  if (name == "MB") return ScenarioKind::MB;
  throw InputError("unknown scenario '" + name + "'");
}

double dgp_propensity(double z1, double z2, double z3) {
  return expit(15.0 - 0.1 * z1 + 2.5 * z2 - 1.0 * z3 - 0.02 * z1 * z2 +
               0.005 * z1 * z3);
}

double dgp_outcome_mean(double x, double z1, double z2) {
  return 1000.0 + 11.5 * z1 + 100.0 * z2 - 15.0 * z1 * z2 + 25.0 * x -
         5.5 * x * z1 - 30.0 * x * z2 + 20.0 * x * z1 * z2;
}

double true_ace() {
  // E[25 - 5.5 Z1 - 30 Z2 + 20 Z1 Z2] with Z1, Z2 independent.
  return 25.0 - 5.5 * kZ1Mean - 30.0 * kZ2Prev + 20.0 * kZ1Mean * kZ2Prev;
}

Dataset generate_sample(const DGPConfig& config, std::uint64_t replicate_index) {
  config.validate();
  Rng rng(config.seed, replicate_index);
  const Eigen::Index n = config.n;

  Eigen::VectorXd z1(n), z2(n), z3(n), z1_dev2(n), x(n), y0(n), y1(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z1[i] = rng.normal(kZ1Mean, kZ1Sd);
    z2[i] = rng.bernoulli(kZ2Prev);
    z3[i] = rng.bernoulli(kZ3Prev);
    z1_dev2[i] = (z1[i] - kZ1Mean) * (z1[i] - kZ1Mean);
    x[i] = rng.bernoulli(dgp_propensity(z1[i], z2[i], z3[i]));
    y0[i] = rng.normal(dgp_outcome_mean(0.0, z1[i], z2[i]), config.sigma);
    y1[i] = rng.normal(dgp_outcome_mean(1.0, z1[i], z2[i]), config.sigma);
    y[i] = x[i] == 1.0 ? y1[i] : y0[i];
  }

  Dataset data;
  data.set_exposure("x", std::move(x));
  data.set_outcome("y", std::move(y));
  data.add_covariate("z1", std::move(z1));
  data.add_covariate("z2", std::move(z2));
  data.add_covariate("z3", std::move(z3));
  data.add_covariate("z1_dev2", std::move(z1_dev2));
  data.set_potential_outcomes(std::move(y0), std::move(y1));
  return data;
}

Scenario scenario_specs(ScenarioKind kind) {
  const std::string correct_propensity = "1, z1, z2, z3, z1*z2, z1*z3";
  const std::string naive_propensity = "1, z1_dev2";
  const std::string correct_outcome = "1, z1, z2, z1*z2, x, x*z1, x*z2, x*z1*z2";
  const std::string naive_outcome = "1, x, z1_dev2";

  const bool propensity_wrong = kind == ScenarioKind::MW || kind == ScenarioKind::MB;
  const bool outcome_wrong = kind == ScenarioKind::MO || kind == ScenarioKind::MB;

  Scenario scenario;
  scenario.kind = kind;
  scenario.spec.propensity =
      ModelSpec::parse(propensity_wrong ? naive_propensity : correct_propensity, "x");
  scenario.spec.outcome =
      ModelSpec::parse(outcome_wrong ? naive_outcome : correct_outcome, "y");
  scenario.spec.outcome_link = Link::Identity;
  scenario.spec.tmle_stage1_link = Link::Identity;
  scenario.spec.bounds = std::nullopt;  // per-replicate observed min/max
  return scenario;
}

namespace {

void run_replicate(const DGPConfig& config, std::uint64_t replicate_index,
                   const std::vector<Scenario>& scenarios,
                   const std::vector<EstimatorKind>& estimators, double level,
                   ReplicateResult* slot) {
  const Dataset data = generate_sample(config, replicate_index);
  const int rep = static_cast<int>(replicate_index) + 1;

  for (const Scenario& scenario : scenarios) {
    PropensityFit ps;
    bool ps_ok = true;
    try {
      ps = estimate_propensity(data, scenario.spec.propensity);
    } catch (const Error&) {
      ps_ok = false;
    }
    for (EstimatorKind kind : estimators) {
      ReplicateResult& row = *slot++;
      row.rep = rep;
      row.scenario = scenario.kind;
      row.estimator = kind;
      row.converged = false;
      row.dr = row.se_es = row.se_if = std::numeric_limits<double>::quiet_NaN();
      row.ci_es_lo = row.ci_es_hi = row.ci_if_lo = row.ci_if_hi =
          std::numeric_limits<double>::quiet_NaN();
      if (!ps_ok) continue;
      try {
        const CausalEstimate est = estimate_ace(kind, data, ps, scenario.spec);
        const SandwichResult sw =
            sandwich_at(kind, data, scenario.spec, make_theta(kind, ps, est));
        row.dr = est.dr;
        row.se_es = sw.se_dr;
        row.se_if = if_variance_se(est, ps, data);
        std::tie(row.ci_es_lo, row.ci_es_hi) = wald_ci(est.dr, row.se_es, level);
        std::tie(row.ci_if_lo, row.ci_if_hi) = wald_ci(est.dr, row.se_if, level);
        row.converged = true;
      } catch (const Error&) {
        // leave the row marked non-converged; summaries exclude it
      }
    }
  }
}

}  // namespace

std::vector<ReplicateResult> run_study(const DGPConfig& config,
                                       const std::vector<ScenarioKind>& scenario_kinds,
                                       const std::vector<EstimatorKind>& estimators,
                                       int workers, double level) {
  config.validate();
  if (scenario_kinds.empty() || estimators.empty())
    throw InputError("study needs at least one scenario and one estimator");

  std::vector<Scenario> scenarios;
  scenarios.reserve(scenario_kinds.size());
  for (ScenarioKind kind : scenario_kinds) scenarios.push_back(scenario_specs(kind));

  const int reps = config.replicates;
  const std::size_t rows_per_rep = scenarios.size() * estimators.size();
  std::vector<ReplicateResult> results(static_cast<std::size_t>(reps) * rows_per_rep);

  if (workers <= 0)
    workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, reps));

  std::atomic<int> next{0};
  auto worker_loop = [&] {
    for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1))
      run_replicate(config, static_cast<std::uint64_t>(r), scenarios, estimators,
                    level, &results[static_cast<std::size_t>(r) * rows_per_rep]);
  };

  if (workers == 1) {
    worker_loop();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker_loop);
    for (auto& thread : pool) thread.join();
  }
  return results;
}

const SummaryRow& SimSummary::row(ScenarioKind scenario, EstimatorKind estimator) const {
  for (const auto& r : rows)
    if (r.scenario == scenario && r.estimator == estimator) return r;
  throw InputError("no summary row for " + scenario_name(scenario) + "/" +
                   estimator_name(estimator));
}

SimSummary summarize(const std::vector<ReplicateResult>& results, double true_ace) {
  if (results.empty()) throw InputError("cannot summarize an empty results table");

  // Group keys in first-appearance order (replicate order is fixed upstream).
  std::vector<std::pair<ScenarioKind, EstimatorKind>> keys;
  for (const auto& r : results) {
    const std::pair<ScenarioKind, EstimatorKind> key{r.scenario, r.estimator};
    bool found = false;
    for (const auto& k : keys) found = found || k == key;
    if (!found) keys.push_back(key);
  }

  SimSummary summary;
  summary.true_ace = true_ace;
  for (const auto& [scenario, estimator] : keys) {
    SummaryRow row;
    row.scenario = scenario;
    row.estimator = estimator;

    std::vector<const ReplicateResult*> used;
    for (const auto& r : results) {
      if (r.scenario != scenario || r.estimator != estimator) continue;
      if (r.converged)
        used.push_back(&r);
      else
        ++row.n_excluded;
    }
    row.n_used = static_cast<Eigen::Index>(used.size());
    if (used.empty()) throw InputError("no converged replicates for " +
                                       scenario_name(scenario) + "/" +
                                       estimator_name(estimator));

    const double m = static_cast<double>(used.size());
    double mean_dr = 0.0, mean_se_es = 0.0, mean_se_if = 0.0;
    for (const auto* r : used) {
      mean_dr += r->dr;
      mean_se_es += r->se_es;
      mean_se_if += r->se_if;
    }
    mean_dr /= m;
    mean_se_es /= m;
    mean_se_if /= m;

    double ss = 0.0;
    for (const auto* r : used) ss += (r->dr - mean_dr) * (r->dr - mean_dr);
    const double ese = used.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;

    Eigen::Index cover_es = 0, cover_if = 0;
    for (const auto* r : used) {
      cover_es += (r->ci_es_lo <= true_ace && true_ace <= r->ci_es_hi);
      cover_if += (r->ci_if_lo <= true_ace && true_ace <= r->ci_if_hi);
    }

    row.bias = mean_dr - true_ace;
    row.rel_bias_pct = std::abs(row.bias) / std::abs(true_ace) * 100.0;
    row.ese = ese;
    row.ase_es = mean_se_es;
    row.ase_if = mean_se_if;
    row.ser_es = ese > 0.0 ? mean_se_es / ese : 0.0;
    row.ser_if = ese > 0.0 ? mean_se_if / ese : 0.0;
    row.cov_es_pct = static_cast<double>(cover_es) / m * 100.0;
    row.cov_if_pct = static_cast<double>(cover_if) / m * 100.0;
    row.vr_es.reserve(used.size());
    row.vr_if.reserve(used.size());
    for (const auto* r : used) {
      row.vr_es.push_back(ese > 0.0 ? r->se_es / ese : 0.0);
      row.vr_if.push_back(ese > 0.0 ? r->se_if / ese : 0.0);
    }
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

std::string results_csv_header() {
  return "rep,scenario,estimator,dr,se_es,se_if,ci_es_lo,ci_es_hi,ci_if_lo,ci_if_hi,converged";
}

std::string summary_csv_header() {
  return "scenario,estimator,bias,rel_bias_pct,ese,ase_es,ser_es,cov_es_pct,"
         "ase_if,ser_if,cov_if_pct,n_used,n_excluded";
}

std::string vr_csv_header() { return "rep,scenario,estimator,vr_es,vr_if"; }

void write_results_csv(const std::string& path,
                       const std::vector<ReplicateResult>& results) {
  std::string out = results_csv_header() + "\n";
  for (const auto& r : results)
    append_csv_row(out, {std::to_string(r.rep), scenario_name(r.scenario),
                         estimator_name(r.estimator), format_double(r.dr),
                         format_double(r.se_es), format_double(r.se_if),
                         format_double(r.ci_es_lo), format_double(r.ci_es_hi),
                         format_double(r.ci_if_lo), format_double(r.ci_if_hi),
                         r.converged ? "1" : "0"});
  write_file(path, out);
}

void write_summary_csv(const std::string& path, const SimSummary& summary) {
  std::string out = summary_csv_header() + "\n";
  for (const auto& r : summary.rows)
    append_csv_row(out, {scenario_name(r.scenario), estimator_name(r.estimator),
                         format_double(r.bias), format_double(r.rel_bias_pct),
                         format_double(r.ese), format_double(r.ase_es),
                         format_double(r.ser_es), format_double(r.cov_es_pct),
                         format_double(r.ase_if), format_double(r.ser_if),
                         format_double(r.cov_if_pct), std::to_string(r.n_used),
                         std::to_string(r.n_excluded)});
  write_file(path, out);
}

void write_vr_csv(const std::string& path, const std::vector<ReplicateResult>& results,
                  const SimSummary& summary) {
  std::string out = vr_csv_header() + "\n";
  for (const auto& r : results) {
    if (!r.converged) continue;
    const SummaryRow& row = summary.row(r.scenario, r.estimator);
    const double vr_es = row.ese > 0.0 ? r.se_es / row.ese : 0.0;
    const double vr_if = row.ese > 0.0 ? r.se_if / row.ese : 0.0;
    append_csv_row(out, {std::to_string(r.rep), scenario_name(r.scenario),
                         estimator_name(r.estimator), format_double(vr_es),
                         format_double(vr_if)});
  }
  write_file(path, out);
}

}  // namespace drest
