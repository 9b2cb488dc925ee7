#include "drest/inference.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

namespace drest {

namespace {

constexpr double kScoreClip = 1e-12;  // keeps 1/e and 1/(1-e) finite
constexpr double kBreadConditionLimit = 1e12;

double clip_unit(double p, Eigen::Index& counter, double eps) {
  if (p < eps) {
    ++counter;
    return eps;
  }
  if (p > 1.0 - eps) {
    ++counter;
    return 1.0 - eps;
  }
  return p;
}

}  // namespace

ThetaStack ThetaStack::pack(EstimatorKind kind, const Eigen::VectorXd& alpha,
                            const Eigen::VectorXd& outcome_coefs, double eta1,
                            double eta0, double mu1, double mu0, double dr) {
  ThetaStack stack;
  stack.kind = kind;
  stack.p_propensity = alpha.size();
  stack.p_outcome = outcome_coefs.size();
  const Eigen::Index extra = kind == EstimatorKind::Tmle ? 5 : 3;
  stack.values.resize(alpha.size() + outcome_coefs.size() + extra);
  stack.values << alpha, outcome_coefs;
  Eigen::Index at = alpha.size() + outcome_coefs.size();
  if (kind == EstimatorKind::Tmle) {
    stack.values[at++] = eta1;
    stack.values[at++] = eta0;
  }
  stack.values[at++] = mu1;
  stack.values[at++] = mu0;
  stack.values[at] = dr;
  return stack;
}

ThetaStack make_theta(EstimatorKind kind, const PropensityFit& ps,
                      const CausalEstimate& est) {
  if (est.kind != kind) throw ContractError("estimate kind does not match stack kind");
  return ThetaStack::pack(kind, ps.fit.coefficients, est.outcome_fit.coefficients,
                          est.eta1, est.eta0, est.mu1, est.mu0, est.dr);
}

PsiWorkspace::PsiWorkspace(EstimatorKind kind, const Dataset& data,
                           const AnalysisSpec& spec)
    : kind_(kind),
      outcome_link_(kind == EstimatorKind::Tmle ? spec.tmle_stage1_link
                                                : spec.outcome_link),
      exposure_(data.exposure()) {
  propensity_design_ = build_design(data, spec.propensity).values;
  outcome_design_ = build_design(data, spec.outcome).values;
  outcome_design1_ = build_design(data.with_exposure_set(1.0), spec.outcome).values;
  outcome_design0_ = build_design(data.with_exposure_set(0.0), spec.outcome).values;

  if (kind_ == EstimatorKind::Tmle) {
    const ScaledOutcome scaled = scale_outcome(data, spec.bounds);
    response_ = scaled.ystar;
    bound_lo_ = scaled.lo;
    bound_hi_ = scaled.hi;
  } else {
    response_ = data.outcome();
  }
  dim_ = propensity_design_.cols() + outcome_design_.cols() +
         (kind_ == EstimatorKind::Tmle ? 5 : 3);
}

Eigen::MatrixXd PsiWorkspace::psi(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim_) throw SchemaError("theta dimension does not match stack");
  const Eigen::Index n = exposure_.size();
  const Eigen::Index p_g = propensity_design_.cols();
  const Eigen::Index p_h = outcome_design_.cols();
  const bool tmle = kind_ == EstimatorKind::Tmle;

  const auto alpha = theta.segment(0, p_g);
  const auto coefs = theta.segment(p_g, p_h);
  const double eta1 = tmle ? theta[p_g + p_h] : 0.0;
  const double eta0 = tmle ? theta[p_g + p_h + 1] : 0.0;
  const double mu1 = theta[dim_ - 3];
  const double mu0 = theta[dim_ - 2];
  const double dr = theta[dim_ - 1];

  const Eigen::VectorXd eta_ps = propensity_design_ * alpha;
  const Eigen::VectorXd lin = outcome_design_ * coefs;
  const Eigen::VectorXd lin1 = outcome_design1_ * coefs;
  const Eigen::VectorXd lin0 = outcome_design0_ * coefs;

  Eigen::MatrixXd out(n, dim_);
  const double range = bound_hi_ - bound_lo_;

  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = exposure_[i];
    const double y = response_[i];
    const double e_raw = expit(eta_ps[i]);
    const double e = clip_unit(e_raw, clip_count_, kScoreClip);

    out.block(i, 0, 1, p_g) = (x - e_raw) * propensity_design_.row(i);

    const double resid = y - link_inverse(outcome_link_, lin[i]);
    const double score_w =
        kind_ == EstimatorKind::WeightedRegression ? x / e + (1.0 - x) / (1.0 - e) : 1.0;
    out.block(i, p_g, 1, p_h) = (score_w * resid) * outcome_design_.row(i);

    Eigen::Index at = p_g + p_h;
    switch (kind_) {
      case EstimatorKind::Classic: {
        const double a1 = link_inverse(outcome_link_, lin1[i]);
        const double a0 = link_inverse(outcome_link_, lin0[i]);
        out(i, at) = (x * y - (x - e) * a1) / e - mu1;
        out(i, at + 1) = ((1.0 - x) * y + (x - e) * a0) / (1.0 - e) - mu0;
        break;
      }
      case EstimatorKind::WeightedRegression: {
        out(i, at) = link_inverse(outcome_link_, lin1[i]) - mu1;
        out(i, at + 1) = link_inverse(outcome_link_, lin0[i]) - mu0;
        break;
      }
      case EstimatorKind::Tmle: {
        const double a1 = clip_unit(link_inverse(outcome_link_, lin1[i]),
                                    clip_count_, kProbClip);
        const double a0 = clip_unit(link_inverse(outcome_link_, lin0[i]),
                                    clip_count_, kProbClip);
        const double c1_star = expit(eta1 + logit(a1));
        const double c0_star = expit(eta0 + logit(a0));
        out(i, at) = x / e * (y - c1_star);
        out(i, at + 1) = (1.0 - x) / (1.0 - e) * (y - c0_star);
        out(i, at + 2) = (c1_star * range + bound_lo_) - mu1;
        out(i, at + 3) = (c0_star * range + bound_lo_) - mu0;
        break;
      }
    }
    out(i, dim_ - 1) = mu1 - mu0 - dr;
  }
  return out;
}

Eigen::VectorXd PsiWorkspace::psi_col_means(const Eigen::VectorXd& theta) const {
  return psi(theta).colwise().mean();
}

Eigen::MatrixXd psi_rows(EstimatorKind kind, const Dataset& data,
                         const AnalysisSpec& spec, const ThetaStack& theta) {
  return PsiWorkspace(kind, data, spec).psi(theta.values);
}

ThetaStack solve_theta(EstimatorKind kind, const Dataset& data,
                       const AnalysisSpec& spec) {
  const PropensityFit ps = estimate_propensity(data, spec.propensity);
  const CausalEstimate est = estimate_ace(kind, data, ps, spec);
  ThetaStack stack = make_theta(kind, ps, est);

  const PsiWorkspace workspace(kind, data, spec);
  const double worst = workspace.psi_col_means(stack.values).cwiseAbs().maxCoeff();
  if (worst > 1e-8)
    throw ConvergenceError("stacked estimating equations not zeroed (max mean " +
                           std::to_string(worst) + ")");
  return stack;
}

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& theta) {
  const Eigen::Index m = theta.size();
  Eigen::MatrixXd jac;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
    Eigen::VectorXd up = theta, down = theta;
    up[j] += h;
    down[j] -= h;
    const Eigen::VectorXd diff = (f(up) - f(down)) / (2.0 * h);
    if (jac.size() == 0) jac.resize(diff.size(), m);
    jac.col(j) = diff;
  }
  return jac;
}

Eigen::MatrixXd bread_matrix(EstimatorKind kind, const Dataset& data,
                             const AnalysisSpec& spec, const ThetaStack& theta_hat) {
  const PsiWorkspace workspace(kind, data, spec);
  const auto means = [&workspace](const Eigen::VectorXd& t) {
    return workspace.psi_col_means(t);
  };
  return -fd_jacobian(means, theta_hat.values);
}

Eigen::MatrixXd meat_matrix(const Eigen::MatrixXd& psi) {
  if (!psi.allFinite()) throw InputError("non-finite psi rows");
  return psi.transpose() * psi / static_cast<double>(psi.rows());
}

SandwichResult sandwich_from(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat,
                             Eigen::Index n) {
  SandwichResult out;
  out.bread = bread;
  out.meat = meat;

  // The stacked equations mix scales (score rows carry outcome units times
  // design units, mean rows are O(1)), which inflates the raw condition
  // number by orders of magnitude. Equilibrate rows then columns to unit
  // max-abs so the condition guard measures singularity, not units, and
  // solve in the scaled system.
  const Eigen::Index m = bread.rows();
  Eigen::VectorXd row_scale = bread.cwiseAbs().rowwise().maxCoeff();
  if (row_scale.minCoeff() <= 0.0)
    throw SingularBreadError("bread matrix has an all-zero row");
  Eigen::MatrixXd scaled = row_scale.cwiseInverse().asDiagonal() * bread;
  Eigen::VectorXd col_scale = scaled.cwiseAbs().colwise().maxCoeff();
  if (col_scale.minCoeff() <= 0.0)
    throw SingularBreadError("bread matrix has an all-zero column");
  scaled = scaled * col_scale.cwiseInverse().asDiagonal();

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  out.bread_condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(out.bread_condition < kBreadConditionLimit))
    throw SingularBreadError("bread matrix condition number " +
                             std::to_string(out.bread_condition));

  // A = Dr^{-1} S Dc^{-1}  =>  A^{-1} B A^{-T} = Dc S^{-1} (Dr B Dr) S^{-T} Dc
  Eigen::MatrixXd meat_scaled(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      meat_scaled(i, j) = meat(i, j) / (row_scale[i] * row_scale[j]);

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(scaled);
  const Eigen::MatrixXd half = lu.solve(meat_scaled);
  Eigen::MatrixXd v = lu.solve(half.transpose()).transpose();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      v(i, j) /= col_scale[i] * col_scale[j] * static_cast<double>(n);

  out.asymmetry = (v - v.transpose()).cwiseAbs().maxCoeff();
  out.covariance = 0.5 * (v + v.transpose());
  const double var_dr = out.covariance(m - 1, m - 1);
  out.se_dr = var_dr > 0.0 ? std::sqrt(var_dr) : 0.0;
  return out;
}

SandwichResult sandwich_at(EstimatorKind kind, const Dataset& data,
                           const AnalysisSpec& spec, const ThetaStack& theta_hat) {
  const PsiWorkspace workspace(kind, data, spec);
  const auto means = [&workspace](const Eigen::VectorXd& t) {
    return workspace.psi_col_means(t);
  };
  const Eigen::MatrixXd bread = -fd_jacobian(means, theta_hat.values);
  const Eigen::MatrixXd meat = meat_matrix(workspace.psi(theta_hat.values));
  SandwichResult out = sandwich_from(bread, meat, workspace.n());
  out.clip_count = workspace.clip_count();
  return out;
}

SandwichResult sandwich(EstimatorKind kind, const Dataset& data,
                        const AnalysisSpec& spec) {
  return sandwich_at(kind, data, spec, solve_theta(kind, data, spec));
}

double if_variance_se(const CausalEstimate& est, const PropensityFit& ps,
                      const Dataset& data) {
  const Eigen::Index n = data.size();
  if (est.pseudo1.size() != n || est.pseudo0.size() != n)
    throw ContractError("estimate lacks per-observation pseudo-outcomes");
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = data.exposure()[i];
    const double y = data.outcome()[i];
    const double e = ps.scores[i];
    const double infl = x * y / e - (1.0 - x) * y / (1.0 - e) -
                        (x - e) / (e * (1.0 - e)) *
                            ((1.0 - e) * est.pseudo1[i] + e * est.pseudo0[i]) -
                        est.dr;
    ss += infl * infl;
  }
  return std::sqrt(ss) / static_cast<double>(n);
}

std::pair<double, double> wald_ci(double point, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0,1)");
  if (se < 0.0) throw InputError("standard error must be non-negative");
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, 0.5 * (1.0 + level));
  return {point - z * se, point + z * se};
}

InferenceOutput infer(EstimatorKind kind, const Dataset& data, const AnalysisSpec& spec,
                      double level) {
  const PropensityFit ps = estimate_propensity(data, spec.propensity);
  const CausalEstimate est = estimate_ace(kind, data, ps, spec);
  const SandwichResult sw = sandwich_at(kind, data, spec, make_theta(kind, ps, est));

  InferenceOutput out;
  out.dr = est.dr;
  out.se_sandwich = sw.se_dr;
  out.se_if = if_variance_se(est, ps, data);
  out.ci_sandwich = wald_ci(out.dr, out.se_sandwich, level);
  out.ci_if = wald_ci(out.dr, out.se_if, level);
  out.level = level;
  return out;
}

}  // namespace drest
