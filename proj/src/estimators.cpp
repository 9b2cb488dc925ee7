#include "drest/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace drest {

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Classic: return "classic";
    case EstimatorKind::WeightedRegression: return "wr";
    case EstimatorKind::Tmle: return "tmle";
  }
  return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "classic") return EstimatorKind::Classic;
  if (name == "wr") return EstimatorKind::WeightedRegression;
  if (name == "tmle") return EstimatorKind::Tmle;
  throw InputError("unknown estimator '" + name + "'");
}

namespace {

double clip_prob(double p) {
  return std::clamp(p, kProbClip, 1.0 - kProbClip);
}

// Counterfactual mean-scale predictions under exposure x for every unit.
Eigen::VectorXd counterfactual_prediction(const Dataset& data, const ModelSpec& spec,
                                          const FittedGLM& fit, double x) {
  const DesignMatrix design = build_design(data.with_exposure_set(x), spec);
  return predict(fit, design);
}

}  // namespace

PropensityFit estimate_propensity(const Dataset& data, const ModelSpec& propensity_spec) {
  if (propensity_spec.response && *propensity_spec.response != data.exposure_name())
    throw ContractError("propensity spec response must be the exposure");
  const DesignMatrix design = build_design(data, propensity_spec);
  PropensityFit out;
  out.fit = fit_glm(design, data.exposure(), Link::Logit);

  const Eigen::Index n = data.size();
  const Eigen::VectorXd eta = design.values * out.fit.coefficients;
  out.scores.resize(n);
  out.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = expit(eta[i]);
    if (e <= 0.0 || e >= 1.0)
      throw PositivityError("fitted propensity score of 0 or 1 (row " +
                            std::to_string(i + 1) + ")");
    out.scores[i] = e;
    const double x = data.exposure()[i];
    out.weights[i] = x / e + (1.0 - x) / (1.0 - e);
  }
  return out;
}

std::pair<double, double> classic_aipw_means(const Eigen::VectorXd& exposure,
                                             const Eigen::VectorXd& outcome,
                                             const Eigen::VectorXd& scores,
                                             const Eigen::VectorXd& a1,
                                             const Eigen::VectorXd& a0) {
  const Eigen::Index n = exposure.size();
  double sum1 = 0.0, sum0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = exposure[i];
    const double y = outcome[i];
    const double e = scores[i];
    sum1 += (x * y - (x - e) * a1[i]) / e;
    sum0 += ((1.0 - x) * y + (x - e) * a0[i]) / (1.0 - e);
  }
  return {sum1 / static_cast<double>(n), sum0 / static_cast<double>(n)};
}

CausalEstimate classic_aipw(const Dataset& data, const PropensityFit& ps,
                            const ModelSpec& outcome_spec, Link outcome_link) {
  const DesignMatrix design = build_design(data, outcome_spec);
  CausalEstimate est;
  est.kind = EstimatorKind::Classic;
  est.outcome_fit = fit_glm(design, data.outcome(), outcome_link);
  est.pseudo1 = counterfactual_prediction(data, outcome_spec, est.outcome_fit, 1.0);
  est.pseudo0 = counterfactual_prediction(data, outcome_spec, est.outcome_fit, 0.0);
  std::tie(est.mu1, est.mu0) = classic_aipw_means(data.exposure(), data.outcome(),
                                                  ps.scores, est.pseudo1, est.pseudo0);
  est.dr = est.mu1 - est.mu0;
  return est;
}

CausalEstimate wr_aipw(const Dataset& data, const PropensityFit& ps,
                       const ModelSpec& outcome_spec, Link outcome_link) {
  const DesignMatrix design = build_design(data, outcome_spec);
  CausalEstimate est;
  est.kind = EstimatorKind::WeightedRegression;
  est.outcome_fit = fit_glm(design, data.outcome(), outcome_link, ps.weights);
  est.pseudo1 = counterfactual_prediction(data, outcome_spec, est.outcome_fit, 1.0);
  est.pseudo0 = counterfactual_prediction(data, outcome_spec, est.outcome_fit, 0.0);
  est.mu1 = est.pseudo1.mean();
  est.mu0 = est.pseudo0.mean();
  est.dr = est.mu1 - est.mu0;
  return est;
}

ScaledOutcome scale_outcome(const Dataset& data,
                            std::optional<std::pair<double, double>> bounds) {
  const Eigen::VectorXd& y = data.outcome();
  ScaledOutcome out;
  if (bounds) {
    out.lo = bounds->first;
    out.hi = bounds->second;
    if (out.hi <= out.lo) throw BoundsError("outcome bounds must satisfy lo < hi");
    if (y.minCoeff() < out.lo || y.maxCoeff() > out.hi)
      throw BoundsError("outcome values fall outside the supplied bounds");
  } else {
    out.lo = y.minCoeff();
    out.hi = y.maxCoeff();
    if (out.hi <= out.lo) throw BoundsError("outcome has zero spread; supply bounds");
  }
  const Eigen::Index n = y.size();
  out.ystar.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = (y[i] - out.lo) / (out.hi - out.lo);
    const double clipped = clip_prob(s);
    out.n_clipped += (clipped != s);
    out.ystar[i] = clipped;
  }
  return out;
}

double fit_targeting(const Eigen::VectorXd& pseudo, const Eigen::VectorXd& arm_weights,
                     const Eigen::VectorXd& ystar) {
  const Eigen::Index n = pseudo.size();
  if (arm_weights.size() != n || ystar.size() != n)
    throw SchemaError("targeting inputs must have equal length");
  if (arm_weights.maxCoeff() <= 0.0)
    throw EmptyArmError("targeting step received only zero weights");

  Eigen::VectorXd off(n);
  for (Eigen::Index i = 0; i < n; ++i) off[i] = logit(pseudo[i]);

  DesignMatrix intercept;
  intercept.values = Eigen::MatrixXd::Ones(n, 1);
  intercept.labels = {"1"};
  const FittedGLM fit = fit_glm(intercept, ystar, Link::Logit, arm_weights, off);
  return fit.coefficients[0];
}

CausalEstimate tmle(const Dataset& data, const PropensityFit& ps,
                    const ModelSpec& outcome_spec,
                    std::optional<std::pair<double, double>> bounds, Link stage1_link) {
  const ScaledOutcome scaled = scale_outcome(data, bounds);
  const Eigen::Index n = data.size();

  const DesignMatrix design = build_design(data, outcome_spec);
  CausalEstimate est;
  est.kind = EstimatorKind::Tmle;
  est.bound_lo = scaled.lo;
  est.bound_hi = scaled.hi;
  est.outcome_fit = fit_glm(design, scaled.ystar, stage1_link);

  Eigen::VectorXd a1 = counterfactual_prediction(data, outcome_spec, est.outcome_fit, 1.0);
  Eigen::VectorXd a0 = counterfactual_prediction(data, outcome_spec, est.outcome_fit, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    a1[i] = clip_prob(a1[i]);
    a0[i] = clip_prob(a0[i]);
  }

  const Eigen::VectorXd& x = data.exposure();
  const Eigen::VectorXd w1 = x.cwiseProduct(ps.weights);
  const Eigen::VectorXd w0 = (Eigen::VectorXd::Ones(n) - x).cwiseProduct(ps.weights);
  est.eta1 = fit_targeting(a1, w1, scaled.ystar);
  est.eta0 = fit_targeting(a0, w0, scaled.ystar);

  const double range = scaled.hi - scaled.lo;
  est.pseudo1.resize(n);
  est.pseudo0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    est.pseudo1[i] = expit(logit(a1[i]) + est.eta1) * range + scaled.lo;
    est.pseudo0[i] = expit(logit(a0[i]) + est.eta0) * range + scaled.lo;
  }
  est.mu1 = est.pseudo1.mean();
  est.mu0 = est.pseudo0.mean();
  est.dr = est.mu1 - est.mu0;

  if (est.mu1 < scaled.lo || est.mu1 > scaled.hi || est.mu0 < scaled.lo ||
      est.mu0 > scaled.hi)
    throw Error("TMLE arm mean escaped the outcome bounds");
  return est;
}

CausalEstimate estimate_ace(EstimatorKind kind, const Dataset& data,
                            const PropensityFit& ps, const AnalysisSpec& spec) {
  switch (kind) {
    case EstimatorKind::Classic:
      return classic_aipw(data, ps, spec.outcome, spec.outcome_link);
    case EstimatorKind::WeightedRegression:
      return wr_aipw(data, ps, spec.outcome, spec.outcome_link);
    case EstimatorKind::Tmle:
      return tmle(data, ps, spec.outcome, spec.bounds, spec.tmle_stage1_link);
  }
  throw Error("unreachable estimator kind");
}

}  // namespace drest
