#ifndef DREST_GLM_HPP
#define DREST_GLM_HPP

#include <Eigen/Dense>
#include <optional>

#include "drest/errors.hpp"
#include "drest/model_matrix.hpp"

namespace drest {

enum class Link { Logit, Identity };

// Overflow-safe inverse logit.
double expit(double eta);
double logit(double p);
double link_inverse(Link link, double eta);

// Maximum-likelihood GLM fit, optionally weighted and with a per-observation
// offset. Logit responses may lie anywhere in [0,1] (quasi-binomial scores),
// which the targeting step on scaled continuous outcomes relies on.
struct FittedGLM {
  Eigen::VectorXd coefficients;
  Link link = Link::Identity;
  bool converged = false;
  int iterations = 0;
  std::optional<Eigen::VectorXd> weights;
  std::optional<Eigen::VectorXd> offset;
};

// Newton scoring (IRLS). Stops when the max absolute coefficient change is
// <= 1e-10, or the relative deviance change is <= 1e-12 with the score
// equations satisfied; errors out after 100 iterations. Identity-link fits
// reduce to one weighted least-squares solve. Rank deficiency on the
// weighted support raises SingularDesignError; separation surfaces as
// ConvergenceError rather than a diverging coefficient vector.
FittedGLM fit_glm(const DesignMatrix& design, const Eigen::VectorXd& response,
                  Link link,
                  const std::optional<Eigen::VectorXd>& weights = std::nullopt,
                  const std::optional<Eigen::VectorXd>& offset = std::nullopt);

// Mean-scale predictions phi^{-1}(h'beta + offset). Logit predictions are
// clamped into the open interval (0,1).
Eigen::VectorXd predict(const FittedGLM& fit, const DesignMatrix& design,
                        const std::optional<Eigen::VectorXd>& offset = std::nullopt);

// Per-observation score contributions w_i {y_i - phi^{-1}(h_i'theta + off_i)} h_i,
// evaluable at arbitrary theta (the sandwich bread differentiates through it).
Eigen::MatrixXd score_rows(const Eigen::VectorXd& theta, const DesignMatrix& design,
                           const Eigen::VectorXd& response, Link link,
                           const std::optional<Eigen::VectorXd>& weights = std::nullopt,
                           const std::optional<Eigen::VectorXd>& offset = std::nullopt);

}  // namespace drest

#endif
