#ifndef DREST_ESTIMATORS_HPP
#define DREST_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>

#include "drest/dataset.hpp"
#include "drest/glm.hpp"
#include "drest/model_matrix.hpp"

namespace drest {

enum class EstimatorKind { Classic, WeightedRegression, Tmle };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

// Probabilities are pulled into [kProbClip, 1 - kProbClip] before any logit;
// boundary predictions would otherwise break the targeting offset.
inline constexpr double kProbClip = 1e-6;

// Model configuration shared by estimation and inference: the two nuisance
// model formulas plus the link choices and outcome bounds that fix the
// estimating-function algebra.
struct AnalysisSpec {
  ModelSpec propensity;  // response: the exposure
  ModelSpec outcome;     // response: the outcome
  Link outcome_link = Link::Identity;     // classic / weighted-regression fits
  Link tmle_stage1_link = Link::Logit;    // stage-1 fit on the scaled outcome
  std::optional<std::pair<double, double>> bounds;  // TMLE scaling; default min/max
};

// Fitted propensity model with scores e in (0,1) and IPTW weights
// W = X/e + (1-X)/(1-e) (so W >= 1 everywhere).
struct PropensityFit {
  FittedGLM fit;
  Eigen::VectorXd scores;
  Eigen::VectorXd weights;
};

// Point estimate of the average causal effect plus the per-observation
// pseudo-outcomes the influence-function variance needs.
struct CausalEstimate {
  EstimatorKind kind = EstimatorKind::Classic;
  double mu1 = 0.0;
  double mu0 = 0.0;
  double dr = 0.0;  // always mu1 - mu0
  Eigen::VectorXd pseudo1;  // a_x, b_x, or c_x on the outcome scale
  Eigen::VectorXd pseudo0;
  FittedGLM outcome_fit;
  // TMLE extras
  double eta1 = 0.0;
  double eta0 = 0.0;
  double bound_lo = 0.0;
  double bound_hi = 0.0;
};

struct ScaledOutcome {
  Eigen::VectorXd ystar;  // (y - lo)/(hi - lo), clipped into [kProbClip, 1-kProbClip]
  double lo = 0.0;
  double hi = 0.0;
  Eigen::Index n_clipped = 0;
};

PropensityFit estimate_propensity(const Dataset& data, const ModelSpec& propensity_spec);

CausalEstimate classic_aipw(const Dataset& data, const PropensityFit& ps,
                            const ModelSpec& outcome_spec,
                            Link outcome_link = Link::Identity);

CausalEstimate wr_aipw(const Dataset& data, const PropensityFit& ps,
                       const ModelSpec& outcome_spec,
                       Link outcome_link = Link::Identity);

ScaledOutcome scale_outcome(const Dataset& data,
                            std::optional<std::pair<double, double>> bounds = std::nullopt);

// Root of sum_i w_i (ystar_i - expit[eta + logit(pseudo_i)]) = 0; the
// intercept-only weighted logistic fit with the pseudo-outcome logits as
// offset. Unique by strict monotonicity of the left side in eta.
double fit_targeting(const Eigen::VectorXd& pseudo, const Eigen::VectorXd& arm_weights,
                     const Eigen::VectorXd& ystar);

CausalEstimate tmle(const Dataset& data, const PropensityFit& ps,
                    const ModelSpec& outcome_spec,
                    std::optional<std::pair<double, double>> bounds = std::nullopt,
                    Link stage1_link = Link::Logit);

// Dispatch on kind using the links and bounds in `spec`.
CausalEstimate estimate_ace(EstimatorKind kind, const Dataset& data,
                            const PropensityFit& ps, const AnalysisSpec& spec);

// The arm-mean algebra of the classic AIPW estimator, separated out so the
// zero-augmentation and exact-prediction identities are testable directly.
std::pair<double, double> classic_aipw_means(const Eigen::VectorXd& exposure,
                                             const Eigen::VectorXd& outcome,
                                             const Eigen::VectorXd& scores,
                                             const Eigen::VectorXd& a1,
                                             const Eigen::VectorXd& a0);

}  // namespace drest

#endif
