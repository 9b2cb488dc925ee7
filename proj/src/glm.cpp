#include "drest/glm.hpp"

#include <cmath>
#include <limits>

namespace drest {

double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("logit argument must lie in (0,1)");
  return std::log(p / (1.0 - p));
}

double link_inverse(Link link, double eta) {
  return link == Link::Logit ? expit(eta) : eta;
}

namespace {

void check_inputs(const DesignMatrix& design, const Eigen::VectorXd& response,
                  Link link, const std::optional<Eigen::VectorXd>& weights,
                  const std::optional<Eigen::VectorXd>& offset) {
  const Eigen::Index n = design.rows();
  if (response.size() != n) throw SchemaError("response length does not match design");
  if (!design.values.allFinite()) throw InputError("non-finite design entries");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(response[i])) throw InputError("non-finite response");
    if (link == Link::Logit && (response[i] < 0.0 || response[i] > 1.0))
      throw InputError("logit-link response must lie in [0,1]");
  }
  if (weights) {
    if (weights->size() != n) throw SchemaError("weights length does not match design");
    for (Eigen::Index i = 0; i < n; ++i)
      if (!std::isfinite((*weights)[i]) || (*weights)[i] < 0.0)
        throw InputError("weights must be finite and non-negative");
  }
  if (offset) {
    if (offset->size() != n) throw SchemaError("offset length does not match design");
    if (!offset->allFinite()) throw InputError("non-finite offset");
  }
}

// Quasi-binomial deviance; responses may be fractional.
double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& w) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double d = 0.0;
    if (y[i] > 0.0) d += y[i] * std::log(y[i] / mu[i]);
    if (y[i] < 1.0) d += (1.0 - y[i]) * std::log((1.0 - y[i]) / (1.0 - mu[i]));
    dev += 2.0 * w[i] * d;
  }
  return dev;
}

double max_abs_score(const Eigen::MatrixXd& H, const Eigen::VectorXd& resid,
                     const Eigen::VectorXd& w) {
  return (H.transpose() * (w.cwiseProduct(resid))).cwiseAbs().maxCoeff();
}

}  // namespace

FittedGLM fit_glm(const DesignMatrix& design, const Eigen::VectorXd& response,
                  Link link, const std::optional<Eigen::VectorXd>& weights,
                  const std::optional<Eigen::VectorXd>& offset) {
  check_inputs(design, response, link, weights, offset);
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  const Eigen::MatrixXd& H = design.values;
  const Eigen::VectorXd w = weights.value_or(Eigen::VectorXd::Ones(n));
  const Eigen::VectorXd off = offset.value_or(Eigen::VectorXd::Zero(n));

  FittedGLM fit;
  fit.link = link;
  fit.weights = weights;
  fit.offset = offset;

  const double score_tol = 1e-8 * static_cast<double>(n);

  if (link == Link::Identity) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd Hw = sw.asDiagonal() * H;
    const Eigen::VectorXd yw = sw.cwiseProduct(response - off);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Hw);
    if (qr.rank() < p) throw SingularDesignError("rank-deficient design in least squares");
    fit.coefficients = qr.solve(yw);
    fit.iterations = 1;
    const Eigen::VectorXd resid = response - off - H * fit.coefficients;
    if (max_abs_score(H, resid, w) > score_tol)
      throw ConvergenceError("least-squares score equations not satisfied");
    fit.converged = true;
    return fit;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double dev_old = std::numeric_limits<double>::infinity();
  const int max_iter = 100;

  for (int iter = 1; iter <= max_iter; ++iter) {
    const Eigen::VectorXd eta = H * beta + off;
    Eigen::VectorXd mu(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      s[i] = w[i] * mu[i] * (1.0 - mu[i]);
    }
    // Weighted least squares on the working response.
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = mu[i] * (1.0 - mu[i]);
      z[i] = (eta[i] - off[i]) + (v > 0.0 ? (response[i] - mu[i]) / v : 0.0);
    }
    const Eigen::VectorXd ss = s.cwiseSqrt();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ss.asDiagonal() * H);
    if (qr.rank() < p) {
      if (iter == 1)
        throw SingularDesignError("rank-deficient design on the weighted support");
      throw ConvergenceError("working design lost rank (separation?)");
    }
    const Eigen::VectorXd beta_new = qr.solve(ss.cwiseProduct(z));
    const double delta = (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    fit.iterations = iter;

    Eigen::VectorXd mu_new(n);
    const Eigen::VectorXd eta_new = H * beta + off;
    for (Eigen::Index i = 0; i < n; ++i) mu_new[i] = expit(eta_new[i]);
    const double dev = binomial_deviance(response, mu_new, w);
    const double rel_dev =
        std::abs(dev - dev_old) / (std::abs(dev) + 0.1);
    dev_old = dev;

    if (delta <= 1e-10) break;
    if (rel_dev <= 1e-12 &&
        max_abs_score(H, response - mu_new, w) <= score_tol)
      break;
    if (iter == max_iter)
      throw ConvergenceError("IRLS did not converge in " + std::to_string(max_iter) +
                             " iterations");
  }

  // Certify the stationary point; separation plateaus fail here.
  Eigen::VectorXd mu(n);
  const Eigen::VectorXd eta = H * beta + off;
  for (Eigen::Index i = 0; i < n; ++i) mu[i] = expit(eta[i]);
  if (max_abs_score(H, response - mu, w) > score_tol)
    throw ConvergenceError("score equations not satisfied at the IRLS stop point");

  // A flat likelihood with saturated linear predictors means the MLE ran off
  // to infinity (separation); refuse to return the diverged coefficients.
  for (Eigen::Index i = 0; i < n; ++i)
    if (w[i] > 0.0 && std::abs(eta[i]) > 30.0)
      throw ConvergenceError("separation suspected: |linear predictor| > 30");

  fit.coefficients = beta;
  fit.converged = true;
  return fit;
}

Eigen::VectorXd predict(const FittedGLM& fit, const DesignMatrix& design,
                        const std::optional<Eigen::VectorXd>& offset) {
  if (design.cols() != fit.coefficients.size())
    throw SchemaError("design width does not match fitted coefficients");
  if (offset && offset->size() != design.rows())
    throw SchemaError("offset length does not match design");
  Eigen::VectorXd eta = design.values * fit.coefficients;
  if (offset) eta += *offset;
  if (fit.link == Link::Identity) return eta;
  Eigen::VectorXd mu(eta.size());
  const double hi = std::nextafter(1.0, 0.0);
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double p = expit(eta[i]);
    if (p <= 0.0) p = std::numeric_limits<double>::min();
    if (p >= 1.0) p = hi;
    mu[i] = p;
  }
  return mu;
}

Eigen::MatrixXd score_rows(const Eigen::VectorXd& theta, const DesignMatrix& design,
                           const Eigen::VectorXd& response, Link link,
                           const std::optional<Eigen::VectorXd>& weights,
                           const std::optional<Eigen::VectorXd>& offset) {
  check_inputs(design, response, link, weights, offset);
  if (theta.size() != design.cols())
    throw SchemaError("parameter length does not match design width");
  const Eigen::Index n = design.rows();
  const Eigen::VectorXd w = weights.value_or(Eigen::VectorXd::Ones(n));
  const Eigen::VectorXd off = offset.value_or(Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd eta = design.values * theta + off;
  Eigen::MatrixXd rows(n, design.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double resid = response[i] - link_inverse(link, eta[i]);
    rows.row(i) = (w[i] * resid) * design.values.row(i);
  }
  return rows;
}

}  // namespace drest
