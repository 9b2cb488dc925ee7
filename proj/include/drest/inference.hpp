#ifndef DREST_INFERENCE_HPP
#define DREST_INFERENCE_HPP

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "drest/estimators.hpp"

namespace drest {

// Stacked M-estimation parameter vector. Layout by block:
//   [alpha (p_propensity), gamma/beta (p_outcome), (eta1, eta0 for TMLE),
//    mu1, mu0, dr]
struct ThetaStack {
  EstimatorKind kind = EstimatorKind::Classic;
  Eigen::Index p_propensity = 0;
  Eigen::Index p_outcome = 0;
  Eigen::VectorXd values;

  Eigen::Index dim() const { return values.size(); }
  bool has_targeting() const { return kind == EstimatorKind::Tmle; }

  Eigen::VectorBlock<const Eigen::VectorXd> alpha() const {
    return values.segment(0, p_propensity);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> outcome_coefs() const {
    return values.segment(p_propensity, p_outcome);
  }
  double eta1() const { return values[p_propensity + p_outcome]; }
  double eta0() const { return values[p_propensity + p_outcome + 1]; }
  double mu1() const { return values[dim() - 3]; }
  double mu0() const { return values[dim() - 2]; }
  double dr() const { return values[dim() - 1]; }

  static ThetaStack pack(EstimatorKind kind, const Eigen::VectorXd& alpha,
                         const Eigen::VectorXd& outcome_coefs, double eta1,
                         double eta0, double mu1, double mu0, double dr);
};

// Assembles the solved stack from already-fitted components.
ThetaStack make_theta(EstimatorKind kind, const PropensityFit& ps,
                      const CausalEstimate& est);

// Precomputed fixed quantities for estimating-function evaluation. Designs,
// responses, and outcome bounds do not depend on theta, so sandwich
// differentiation reuses one workspace across all evaluations. Propensity
// scores and all predictions ARE recomputed from theta on every call; that
// dependence is exactly what separates the sandwich from the
// influence-function variance.
class PsiWorkspace {
 public:
  PsiWorkspace(EstimatorKind kind, const Dataset& data, const AnalysisSpec& spec);

  Eigen::MatrixXd psi(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd psi_col_means(const Eigen::VectorXd& theta) const;

  Eigen::Index dim() const { return dim_; }
  Eigen::Index n() const { return exposure_.size(); }
  Eigen::Index p_propensity() const { return propensity_design_.cols(); }
  Eigen::Index p_outcome() const { return outcome_design_.cols(); }
  // Propensity scores clipped away from 0/1 during evaluation (diagnostic).
  Eigen::Index clip_count() const { return clip_count_; }

 private:
  EstimatorKind kind_;
  Link outcome_link_;
  Eigen::MatrixXd propensity_design_;  // G
  Eigen::MatrixXd outcome_design_;     // H at observed exposure
  Eigen::MatrixXd outcome_design1_;    // H with exposure 1
  Eigen::MatrixXd outcome_design0_;    // H with exposure 0
  Eigen::VectorXd exposure_;
  Eigen::VectorXd response_;  // Y, or Y* for TMLE
  double bound_lo_ = 0.0;
  double bound_hi_ = 1.0;
  Eigen::Index dim_ = 0;
  mutable Eigen::Index clip_count_ = 0;
};

struct SandwichResult {
  Eigen::MatrixXd bread;       // A
  Eigen::MatrixXd meat;        // B
  Eigen::MatrixXd covariance;  // V = A^{-1} B A^{-T} / n, symmetrized
  double se_dr = 0.0;
  double bread_condition = 0.0;
  double asymmetry = 0.0;  // max |V - V'| before symmetrization
  Eigen::Index clip_count = 0;
};

struct InferenceOutput {
  double dr = 0.0;
  double se_sandwich = 0.0;
  double se_if = 0.0;
  std::pair<double, double> ci_sandwich;
  std::pair<double, double> ci_if;
  double level = 0.95;
};

// Per-observation estimating functions at an arbitrary theta.
Eigen::MatrixXd psi_rows(EstimatorKind kind, const Dataset& data,
                         const AnalysisSpec& spec, const ThetaStack& theta);

// Block-sequential solution of sum_i psi(O_i; theta) = 0: nuisance MLEs,
// then closed-form means. Verifies the root property before returning.
ThetaStack solve_theta(EstimatorKind kind, const Dataset& data, const AnalysisSpec& spec);

// Central-difference Jacobian with step 1e-6 * max(1, |theta_j|) per column.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& theta);

// A = -(1/n) sum_i d psi(O_i; theta)/d theta, by central differences on the
// psi column means.
Eigen::MatrixXd bread_matrix(EstimatorKind kind, const Dataset& data,
                             const AnalysisSpec& spec, const ThetaStack& theta_hat);

// B = (1/n) sum_i psi_i psi_i'.
Eigen::MatrixXd meat_matrix(const Eigen::MatrixXd& psi);

// Composition V = A^{-1} B A^{-T} / n with the condition-number guard;
// shared by sandwich() and the generic-stack tests.
SandwichResult sandwich_from(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat,
                             Eigen::Index n);

SandwichResult sandwich(EstimatorKind kind, const Dataset& data, const AnalysisSpec& spec);
SandwichResult sandwich_at(EstimatorKind kind, const Dataset& data,
                           const AnalysisSpec& spec, const ThetaStack& theta_hat);

// Influence-function standard error: se = sqrt(n^{-2} sum_i I_i^2) with
//   I_i = X_i Y_i / e_i - (1-X_i) Y_i / (1-e_i)
//         - {(X_i - e_i) / (e_i (1-e_i))} {(1-e_i) pseudo1_i + e_i pseudo0_i}
//         - DR.
double if_variance_se(const CausalEstimate& est, const PropensityFit& ps,
                      const Dataset& data);

// point +/- z_{(1+level)/2} * se.
std::pair<double, double> wald_ci(double point, double se, double level);

// Point estimate with both variance estimators and both Wald intervals.
InferenceOutput infer(EstimatorKind kind, const Dataset& data, const AnalysisSpec& spec,
                      double level = 0.95);

}  // namespace drest

#endif
